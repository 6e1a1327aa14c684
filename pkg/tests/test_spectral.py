import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from memarb.errors import ContractViolation, NumericalFault
from memarb.spectral import (
    canonical_sign,
    is_weight_matrix,
    project_simplex,
    project_spectrahedron,
    sample_eigvec,
    sample_from_eigen,
    sym_eigen,
)


def random_symmetric(rng, n, scale=1.0):
    A = rng.standard_normal((n, n)) * scale
    return A + A.T


def random_weight_matrix(rng, n):
    W = rng.standard_normal((n, n))
    W = W @ W.T
    return W / np.trace(W)


class _Fixed:
    """Stand-in generator returning one preset uniform."""

    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


def eigen_projectors(values, vectors, gap=1e-8):
    """Group eigenvalues into clusters and return (value, projector) pairs."""
    out = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i - 1] - values[i] > gap:
            V = vectors[:, start:i]
            out.append((values[start:i].mean(), V @ V.T))
            start = i
    return out


class TestSymEigen:
    def test_identity(self):
        values, V = sym_eigen(np.eye(3))
        np.testing.assert_allclose(values, [1, 1, 1])
        np.testing.assert_allclose(V @ V.T, np.eye(3), atol=1e-12)

    def test_diagonal(self):
        values, V = sym_eigen(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(values, [3, 2, 1])
        np.testing.assert_allclose(np.abs(V), np.eye(3)[:, [0, 2, 1]], atol=1e-12)

    def test_analytic_2x2(self):
        values, V = sym_eigen([[2.0, 1.0], [1.0, 2.0]])
        np.testing.assert_allclose(values, [3, 1], atol=1e-14)
        s = np.sqrt(0.5)
        np.testing.assert_allclose(np.abs(V[:, 0]), [s, s], atol=1e-12)
        np.testing.assert_allclose(abs(V[:, 1] @ [s, -s]), 1.0, atol=1e-12)

    def test_rejects_asymmetric(self):
        with pytest.raises(ContractViolation):
            sym_eigen([[1.0, 2.0], [0.0, 1.0]])

    def test_rejects_nonfinite(self):
        with pytest.raises(NumericalFault):
            sym_eigen([[np.nan, 0.0], [0.0, 1.0]])

    def test_sweep_cap(self):
        rng = np.random.default_rng(1)
        with pytest.raises(NumericalFault):
            sym_eigen(random_symmetric(rng, 6), max_sweeps=1)

    def test_deterministic(self):
        M = random_symmetric(np.random.default_rng(2), 7)
        a, b = sym_eigen(M), sym_eigen(M)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.vectors, b.vectors)

    def test_repeated_eigenvalues_projectors(self):
        rng = np.random.default_rng(3)
        Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        lam = np.array([4.0, 4.0, 1.0, 1.0, -2.0])
        M = (Q * lam) @ Q.T
        values, V = sym_eigen(M)
        got = eigen_projectors(values, V)
        want = eigen_projectors(lam, Q)
        assert len(got) == len(want) == 3
        for (gv, gp), (wv, wp) in zip(got, want):
            assert abs(gv - wv) < 1e-10
            np.testing.assert_allclose(gp, wp, atol=1e-9)

    def test_random_matrices_residual_and_orthonormality(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            n = int(rng.integers(1, 31))
            M = random_symmetric(rng, n, scale=rng.uniform(0.1, 10))
            values, V = sym_eigen(M)
            scale = max(1.0, np.linalg.norm(M))
            assert np.linalg.norm(V @ V.T - np.eye(n)) <= 1e-8
            assert np.linalg.norm(M - (V * values) @ V.T) <= 1e-8 * scale
            assert np.all(np.diff(values) <= 0)


class TestProjectSimplex:
    def test_already_in_simplex(self):
        v = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(project_simplex(v), v, atol=1e-15)

    def test_dominant_vertex(self):
        np.testing.assert_allclose(project_simplex([10.0, 0.0]), [1.0, 0.0])

    def test_matches_grid_minimiser(self):
        # exhaustive 1e-4-pitch grid over the 2-simplex gives (0.5333, 0.4333, 0.0334)
        frozen = np.array([0.5333, 0.4333, 0.0334])
        w = project_simplex([0.6, 0.5, 0.1])
        np.testing.assert_allclose(w, frozen, atol=1e-3)

    def test_grid_oracle_coarse(self):
        rng = np.random.default_rng(5)
        h = 2e-3
        a, b = np.meshgrid(np.arange(0, 1 + h / 2, h), np.arange(0, 1 + h / 2, h))
        mask = a + b <= 1 + 1e-12
        grid = np.column_stack([a[mask], b[mask], 1 - a[mask] - b[mask]])
        for _ in range(5):
            v = rng.normal(0.3, 0.6, 3)
            best = grid[np.argmin(np.sum((grid - v) ** 2, axis=1))]
            np.testing.assert_allclose(project_simplex(v), best, atol=2 * h)

    @settings(max_examples=200, deadline=None)
    @given(arrays(float, st.integers(1, 12), elements=st.floats(-1e3, 1e3)))
    def test_properties(self, v):
        w = project_simplex(v)
        assert np.all(w >= 0)
        assert abs(w.sum() - 1) <= 1e-10
        np.testing.assert_allclose(project_simplex(w), w, atol=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(
        arrays(float, 6, elements=st.floats(-50, 50)),
        arrays(float, 6, elements=st.floats(-50, 50)),
    )
    def test_nonexpansive(self, p, q):
        d = np.linalg.norm(project_simplex(p) - project_simplex(q))
        assert d <= np.linalg.norm(p - q) + 1e-10


class TestProjectSpectrahedron:
    def test_fixed_point(self):
        X = random_weight_matrix(np.random.default_rng(6), 4)
        np.testing.assert_allclose(project_spectrahedron(X), X, atol=1e-10)

    def test_diag(self):
        np.testing.assert_allclose(project_spectrahedron(np.diag([2.0, 0.0])), np.diag([1.0, 0.0]), atol=1e-15)

    def test_closer_than_random_members(self):
        rng = np.random.default_rng(7)
        M = random_symmetric(rng, 4)
        X = project_spectrahedron(M)
        d = np.linalg.norm(M - X)
        W = rng.standard_normal((100_000, 4, 4))
        S = W @ np.transpose(W, (0, 2, 1))
        S /= np.trace(S, axis1=1, axis2=2)[:, None, None]
        assert d <= np.min(np.linalg.norm(S - M, axis=(1, 2)))

    def test_idempotent_and_nonexpansive(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            A = random_symmetric(rng, 4)
            B = random_symmetric(rng, 4)
            PA, PB = project_spectrahedron(A), project_spectrahedron(B)
            assert is_weight_matrix(PA)
            np.testing.assert_allclose(project_spectrahedron(PA), PA, atol=1e-10)
            assert np.linalg.norm(PA - PB) <= np.linalg.norm(A - B) + 1e-10

    def test_diameter(self):
        rng = np.random.default_rng(9)
        best = 0.0
        for _ in range(2000):
            X = random_weight_matrix(rng, 3)
            Y = random_weight_matrix(rng, 3)
            best = max(best, np.linalg.norm(X - Y))
        assert best <= np.sqrt(2)
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        v, w = Q[:, 0], Q[:, 1]
        assert np.linalg.norm(np.outer(v, v) - np.outer(w, w)) >= np.sqrt(2) - 1e-9


class TestSampleEigvec:
    def test_rank_one(self):
        rng = np.random.default_rng(10)
        v = np.array([-0.6, 0.8])
        X = np.outer(v, v)
        for _ in range(20):
            np.testing.assert_allclose(sample_eigvec(X, rng), [0.6, -0.8], atol=1e-12)

    def test_two_level_frequencies(self):
        rng = np.random.default_rng(11)
        draws = np.array([sample_eigvec(np.eye(2) / 2, rng) for _ in range(10_000)])
        freq = np.mean(np.abs(draws[:, 0]) > 0.5)
        assert abs(freq - 0.5) <= 0.02

    def test_second_moment(self):
        rng = np.random.default_rng(12)
        X = np.diag([0.7, 0.3])
        draws = np.array([sample_eigvec(X, rng) for _ in range(20_000)])
        est = draws.T @ draws / len(draws)
        assert np.linalg.norm(est - X) <= 3 * 2 / np.sqrt(len(draws))

    def test_batched_draws(self):
        rng = np.random.default_rng(13)
        X = random_weight_matrix(rng, 4)
        eig = sym_eigen(X)
        draws = sample_from_eigen(eig, rng, size=100_000)
        assert draws.shape == (100_000, 4)
        np.testing.assert_allclose(np.linalg.norm(draws, axis=1), 1.0, atol=1e-12)
        assert all(np.array_equal(canonical_sign(d), d) for d in draws[:100])
        est = draws.T @ draws / len(draws)
        assert np.linalg.norm(est - X) <= 3 * 4 / np.sqrt(len(draws))

    def test_batched_matches_scalar_stream(self):
        eig = sym_eigen(random_weight_matrix(np.random.default_rng(14), 3))
        a = sample_from_eigen(eig, np.random.default_rng(0), size=5)
        rng = np.random.default_rng(0)
        u = rng.random(5)
        b = np.array([sample_from_eigen(eig, _Fixed(x)) for x in u])
        np.testing.assert_array_equal(a, b)

    def test_degenerate(self):
        with pytest.raises(NumericalFault):
            sample_eigvec(np.zeros((2, 2)), np.random.default_rng(0))

    def test_sign_convention(self):
        np.testing.assert_array_equal(canonical_sign([0.0, -1e-13, -2.0]), [0.0, 1e-13, 2.0])
        np.testing.assert_array_equal(canonical_sign([0.0, 3.0, -2.0]), [0.0, 3.0, -2.0])
