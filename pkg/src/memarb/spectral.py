"""Dense symmetric eigensolver and the projections built on it.

Everything here works on small dense matrices (portfolio sizes, n of a few
dozen at most). The eigensolver is a cyclic Jacobi method so results are
deterministic for a given input.
"""

from typing import NamedTuple

import numpy as np

from .errors import ContractViolation, NumericalFault

SYMMETRY_RTOL = 1e-12
SIGN_EPS = 1e-12


class EigenDecomposition(NamedTuple):
    """Eigenvalues sorted descending and matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray


def _as_symmetric(M):
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericalFault("matrix has non-finite entries")
    scale = max(1.0, np.linalg.norm(M))
    if np.max(np.abs(M - M.T), initial=0.0) > SYMMETRY_RTOL * scale:
        raise ContractViolation("matrix is not symmetric")
    return 0.5 * (M + M.T)


def sym_eigen(M, tol=1e-12, max_sweeps=100):
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi sweeps.

    Parameters
    ----------
    M : array_like, shape (n, n)
        Symmetric input.
    tol : float
        Sweeps stop once the off-diagonal Frobenius mass drops below
        ``tol * ||M||_F``.
    max_sweeps : int
        Raise :class:`NumericalFault` if not converged after this many sweeps.

    Returns
    -------
    EigenDecomposition
        ``values`` in descending order, ``vectors`` with eigenvectors as
        columns so that ``M ~= V @ diag(values) @ V.T``.
    """
    A = _as_symmetric(M)
    n = A.shape[0]
    V = np.eye(n)
    target = tol * np.linalg.norm(A)

    off = ~np.eye(n, dtype=bool)

    def off_mass():
        return np.linalg.norm(A[off])

    for _ in range(max_sweeps):
        if off_mass() <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c

                col_p = A[:, p].copy()
                col_q = A[:, q]
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :]
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0

                v_p = V[:, p].copy()
                v_q = V[:, q]
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q
    else:
        if off_mass() > target:
            raise NumericalFault(f"Jacobi did not converge in {max_sweeps} sweeps")

    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    return EigenDecomposition(values[order], V[:, order])


def project_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-based: O(n log n). A stable descending sort keeps earlier indices
    first among ties.
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ContractViolation("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise NumericalFault("vector has non-finite entries")
    u = v[np.argsort(-v, kind="stable")]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def canonical_sign(v):
    """Flip ``v`` so its first coordinate with magnitude above 1e-12 is positive."""
    v = np.asarray(v, dtype=float)
    nz = np.nonzero(np.abs(v) > SIGN_EPS)[0]
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def _simplex_eigen(M):
    """Decompose ``M`` and project its spectrum onto the simplex."""
    values, vectors = sym_eigen(M)
    lam = project_simplex(values)
    # clip dust and renormalise so the trace is exactly 1 up to rounding
    lam = np.clip(lam, 0.0, None)
    lam = lam / lam.sum()
    return lam, vectors


def project_spectrahedron(M, return_eigen=False):
    """Frobenius-nearest PSD matrix with unit trace.

    The eigenvalues of ``M`` are projected onto the simplex and the matrix is
    reassembled in the original eigenbasis.

    If ``return_eigen`` is true, also return the ``EigenDecomposition`` of the
    result (weights descending) so callers can sample from it without a
    second decomposition.
    """
    lam, V = _simplex_eigen(M)
    X = (V * lam) @ V.T
    X = 0.5 * (X + X.T)
    if return_eigen:
        return X, EigenDecomposition(lam, V)
    return X


def sample_from_eigen(eig, rng, size=None):
    """Draw column ``i`` of ``eig.vectors`` with probability ``eig.values[i]``.

    With ``size`` given, returns a ``(size, n)`` array of independent draws.
    """
    lam = np.clip(np.asarray(eig.values, dtype=float), 0.0, None)
    total = lam.sum()
    if total < SIGN_EPS:
        raise NumericalFault("degenerate weight matrix: eigenvalues sum to zero")
    cdf = np.cumsum(lam / total)
    u = rng.random() if size is None else rng.random(size)
    idx = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), lam.size - 1)
    if size is None:
        return canonical_sign(eig.vectors[:, int(idx)])
    signed = np.array([canonical_sign(v) for v in np.asarray(eig.vectors).T])
    return signed[idx]


def sample_eigvec(X, rng):
    """Randomised rounding of a weight matrix to a unit vector.

    Returns eigenvector ``v_i`` of ``X`` with probability equal to its
    (clipped, renormalised) eigenvalue, so ``E[x x^T] = X``.
    """
    return sample_from_eigen(sym_eigen(X), rng)


def is_weight_matrix(X, tol=1e-10):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        return False
    if abs(np.trace(X) - 1.0) > tol:
        return False
    return sym_eigen(X).values[-1] >= -tol
