"""Online construction of mean-reverting portfolios.

The per-round loss of a unit-norm weight history against prices ``y`` is::

    f_t = (sum_i x_{t-i}.y_{t-i})**2 - lam * sum_i (x_{t-i}.y_{t-i})**2

over a window of ``m`` rounds. Holding ``x`` fixed gives the quadratic
``g_t(x) = x^T (A_t - B_t) x``, which is not convex, so the learner works on
the linear relaxation ``h_t(X) = <X, A_t - B_t>`` over unit-trace PSD
matrices and rounds ``X_t`` back to a vector by eigenvector sampling. The
played vector is only resampled with probability ``1 / (m sqrt(T))`` per
round, which keeps the memory term of the loss under control.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractViolation, ParameterError
from .memory_core import GRADIENT_SAFETY, MemoryLoss, theorem2_learning_rate
from .spectral import (
    EigenDecomposition,
    canonical_sign,
    project_spectrahedron,
    sample_from_eigen,
    sym_eigen,
)

SPECTRAHEDRON_DIAMETER = math.sqrt(2.0)
DEFAULT_LAMBDA = 2.0
DEFAULT_MEMORY = 5


@dataclass
class LossWindow:
    prices: np.ndarray
    window_sum: np.ndarray
    A: np.ndarray
    B: np.ndarray
    lam: float

    @property
    def memory(self):
        return self.prices.shape[0]

    @property
    def gradient(self):
        return self.A - self.B


def build_loss_window(prices, lam):
    """Quadratic forms of one loss window.

    ``prices`` holds the last ``m`` price vectors, oldest first.
    ``A = s s^T`` with ``s`` the window sum and ``B = lam * sum_i y_i y_i^T``.
    """
    Y = np.asarray(prices, dtype=float)
    if Y.ndim == 1:
        Y = Y[None]
    if Y.ndim != 2 or Y.shape[0] < 1:
        raise ContractViolation("prices must be an (m, n) array with m >= 1")
    if lam < 0:
        raise ParameterError("lambda must be nonnegative")
    s = Y.sum(axis=0)
    return LossWindow(Y, s, np.outer(s, s), lam * (Y.T @ Y), float(lam))


def eval_f(weights, prices, lam):
    """Loss of a weight window against a price window (both ``(m, n)``, oldest first)."""
    W = np.asarray(weights, dtype=float)
    Y = np.asarray(prices, dtype=float)
    if W.ndim == 1:
        W = W[None]
    if Y.ndim == 1:
        Y = Y[None]
    if W.shape != Y.shape:
        raise ContractViolation(f"weights {W.shape} and prices {Y.shape} differ")
    u = np.einsum("ij,ij->i", W, Y)
    return float(u.sum() ** 2 - lam * np.sum(u * u))


def grad_h(window):
    """Gradient of the relaxed loss; constant in ``X``."""
    return window.A - window.B


def eval_h(X, window):
    X = np.asarray(X, dtype=float)
    G = grad_h(window)
    if X.shape != G.shape:
        raise ContractViolation(f"X has shape {X.shape}, expected {G.shape}")
    return float(np.sum(X * G))


class StatArbLoss(MemoryLoss):
    """The portfolio loss of one window exposed as a :class:`MemoryLoss`."""

    def __init__(self, window):
        self.window = window
        self.memory = window.memory
        self._grad = grad_h(window)

    def evaluate(self, weights):
        return eval_f(weights, self.window.prices, self.window.lam)

    def unary_value(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self._grad @ x)

    def unary_gradient(self, x):
        return 2.0 * self._grad @ np.asarray(x, dtype=float)


def _price_matrix(prices):
    Y = np.asarray(getattr(prices, "prices", prices), dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2:
        raise ContractViolation("prices must be a (T, n) array")
    return Y


def loss_gradients(prices, lam, m):
    """``A_t - B_t`` for every full window, shape ``(T - m + 1, n, n)``."""
    Y = _price_matrix(prices)
    T = Y.shape[0]
    if m < 1:
        raise ParameterError("memory length must be at least 1")
    if T < m:
        raise ParameterError(f"need at least m={m} rounds of prices, got {T}")
    windows = sliding_window_view(Y, m, axis=0)  # (T-m+1, n, m)
    s = windows.sum(axis=2)
    A = np.einsum("ti,tj->tij", s, s)
    B = lam * np.einsum("tik,tjk->tij", windows, windows)
    return A - B


def summed_loss_matrix(prices, lam, m):
    """``M = sum_t (A_t - B_t)``; the fixed-weight objective is ``x^T M x``."""
    return loss_gradients(prices, lam, m).sum(axis=0)


def calibrate_gradient_bound(prices, lam, m):
    """``1.1 * max_t ||A_t - B_t||_F`` over the whole price history."""
    grads = loss_gradients(prices, lam, m)
    return GRADIENT_SAFETY * float(np.max(np.linalg.norm(grads, axis=(1, 2))))


def switch_probability(m, T):
    return min(1.0, 1.0 / (m * math.sqrt(T)))


def played_losses(weights, prices, lam, m):
    """``f_t`` on the played window for every round with a full window."""
    W = np.asarray(weights, dtype=float)
    Y = _price_matrix(prices)
    if W.shape != Y.shape:
        raise ContractViolation(f"weights {W.shape} and prices {Y.shape} differ")
    u = np.einsum("ij,ij->i", W, Y)
    win = sliding_window_view(u, m)
    return win.sum(axis=1) ** 2 - lam * np.sum(win * win, axis=1)


@dataclass
class OsaPath:
    """The deterministic part of an OSA run: the relaxed decisions.

    ``X[r]`` is the weight matrix in force at round ``r`` and ``eigen`` its
    decomposition (weights descending), used for sampling.
    """

    X: np.ndarray
    eigen_values: np.ndarray
    eigen_vectors: np.ndarray
    eta: float
    G: float
    lam: float
    memory: int
    gbound_estimated: bool

    @property
    def horizon(self):
        return self.X.shape[0]

    def eigen(self, r):
        return EigenDecomposition(self.eigen_values[r], self.eigen_vectors[r])


def osa_path(prices, lam=DEFAULT_LAMBDA, m=DEFAULT_MEMORY, eta=None, G=None, causal=False):
    """Run the projected-gradient recursion on the relaxed losses.

    Round ``r`` (0-based) has a full window once ``r >= m - 1``; from then on
    ``X_r = Proj(X_{r-1} - eta (A_r - B_r))``. With ``causal=True`` the step
    at round ``r`` uses the previous round's window instead, so ``X_r`` never
    sees ``y_r``.

    ``eta`` defaults to ``D / (sqrt(m) G T^(3/4))`` with ``D = sqrt(2)`` and
    ``G`` from :func:`calibrate_gradient_bound` unless supplied.
    """
    Y = _price_matrix(prices)
    T, n = Y.shape
    grads = loss_gradients(Y, lam, m)
    estimated = G is None
    if G is None:
        G = GRADIENT_SAFETY * float(np.max(np.linalg.norm(grads, axis=(1, 2))))
    if eta is None:
        # zero gradients everywhere: the step size is irrelevant
        eta = 0.0 if G == 0 else theorem2_learning_rate(SPECTRAHEDRON_DIAMETER, G, m, T)
    if eta < 0:
        raise ParameterError("learning rate must be nonnegative")

    X = np.eye(n) / n
    eig = EigenDecomposition(np.full(n, 1.0 / n), np.eye(n))
    Xs = np.empty((T, n, n))
    vals = np.empty((T, n))
    vecs = np.empty((T, n, n))
    first = m if causal else m - 1
    for r in range(T):
        if r >= first:
            step = grads[r - first]
            X, eig = project_spectrahedron(X - eta * step, return_eigen=True)
        Xs[r] = X
        vals[r] = eig.values
        vecs[r] = eig.vectors
    return OsaPath(Xs, vals, vecs, float(eta), float(G), float(lam), int(m), estimated)


def sample_chain(path, rng, switch_prob=None):
    """Sample the played vectors for one run along a fixed ``path``.

    Returns ``(weights, switch_rounds)``; ``weights[r]`` is the vector played
    at round ``r``.
    """
    T = path.horizon
    n = path.X.shape[1]
    p = switch_probability(path.memory, T) if switch_prob is None else switch_prob
    if not 0.0 < p <= 1.0:
        raise ParameterError("switch probability must lie in (0, 1]")
    weights = np.empty((T, n))
    x = sample_from_eigen(path.eigen(0), rng)
    weights[0] = x
    switches = []
    for r in range(1, T):
        if rng.random() < p:
            x = sample_from_eigen(path.eigen(r), rng)
            switches.append(r)
        weights[r] = x
    return weights, np.array(switches, dtype=int)


@dataclass
class OsaRun:
    weights: np.ndarray
    X: np.ndarray
    losses: np.ndarray
    switch_rounds: np.ndarray
    eta: float
    G: float
    lam: float
    memory: int
    switch_prob: float
    seed: object
    gbound_estimated: bool

    @property
    def switches(self):
        return int(self.switch_rounds.size)


def osa_run(
    prices,
    lam=DEFAULT_LAMBDA,
    m=DEFAULT_MEMORY,
    eta=None,
    seed=None,
    G=None,
    causal=False,
    rescale=False,
    path=None,
):
    """Online statistical arbitrage on a price history.

    Parameters
    ----------
    prices : array_like or PriceSeries, shape (T, n)
    lam, m : float, int
        Variance reward and memory length.
    eta : float, optional
        Learning rate; see :func:`osa_path` for the default.
    seed : int, SeedSequence or Generator
        Randomness for the eigenvector sampling and lazy switching.
    G : float, optional
        Gradient bound; calibrated from the data when omitted.
    causal : bool
        Use the previous window's gradient for the update (no peek at ``y_t``).
    rescale : bool
        Divide each asset by its first price before anything else.
    path : OsaPath, optional
        Precomputed relaxed path for these prices and parameters. Lets
        replicate runs share the deterministic part.

    Returns
    -------
    OsaRun
        ``weights`` has one row per round; ``losses`` one entry per round
        with a full window (``T - m + 1`` of them).
    """
    Y = _price_matrix(prices)
    if rescale:
        Y = Y / Y[0]
    if path is None:
        path = osa_path(Y, lam, m, eta=eta, G=G, causal=causal)
    rng = np.random.default_rng(seed)
    p = switch_probability(m, Y.shape[0])
    weights, switch_rounds = sample_chain(path, rng, p)
    losses = played_losses(weights, Y, lam, m)
    return OsaRun(
        weights, path.X, losses, switch_rounds, path.eta, path.G, float(lam), int(m), p, seed,
        path.gbound_estimated,
    )


def offline_optimal_weights(prices, lam=DEFAULT_LAMBDA, m=DEFAULT_MEMORY):
    """Best fixed unit-norm weights in hindsight (the minimum eigenvector of M)."""
    M = summed_loss_matrix(prices, lam, m)
    eig = sym_eigen(M)
    return canonical_sign(eig.vectors[:, -1])


def fixed_weight_objective(x, prices, lam=DEFAULT_LAMBDA, m=DEFAULT_MEMORY):
    x = np.asarray(x, dtype=float)
    return float(x @ summed_loss_matrix(prices, lam, m) @ x)


def osa_regret(run, prices):
    """Realised ``sum f_t(window) - min_x sum g_t(x)`` for one run."""
    M = summed_loss_matrix(prices, run.lam, run.memory)
    return float(run.losses.sum() - sym_eigen(M).values[-1])


def lemma4_gap(path, replicates=2000, seed=None, switch_prob=None):
    """``||X_r - mean(x_r x_r^T)||_F`` per round over independent x-chains.

    The relaxed path is held fixed; only the sampling and switching are
    replicated.
    """
    if replicates < 1:
        raise ParameterError("need at least one replicate")
    rng = np.random.default_rng(seed)
    T = path.horizon
    p = switch_probability(path.memory, T) if switch_prob is None else switch_prob

    def draw(r, k):
        return sample_from_eigen(path.eigen(r), rng, size=k)

    xs = draw(0, replicates)
    gaps = np.empty(T)
    gaps[0] = np.linalg.norm(path.X[0] - xs.T @ xs / replicates)
    for r in range(1, T):
        hit = np.nonzero(rng.random(replicates) < p)[0]
        if hit.size:
            xs[hit] = draw(r, hit.size)
        gaps[r] = np.linalg.norm(path.X[r] - xs.T @ xs / replicates)
    return gaps


def lemma4_bound(m, T, replicates, n):
    """Rounding-drift bound ``sqrt(m) D / T^(1/4)`` plus a ``3 n / sqrt(R)`` sampling allowance."""
    return math.sqrt(m) * SPECTRAHEDRON_DIAMETER / T ** 0.25 + 3.0 * n / math.sqrt(replicates)
