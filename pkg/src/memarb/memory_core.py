"""Online gradient descent for losses with memory.

At round ``t`` the learner plays ``x_t`` and pays ``f_t(x_{t-m+1}, ..., x_t)``,
a loss that looks back over its last ``m`` decisions. The update only ever
uses the gradient of the unary restriction ``g_t(x) = f_t(x, ..., x)``,
followed by a Euclidean projection back onto the decision set.

Regret is measured against the best fixed decision in hindsight, counting
rounds ``t >= m`` only (the first ``m - 1`` rounds have an incomplete window).
"""

import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NumericalFault, ParameterError
from .spectral import project_simplex, project_spectrahedron

GRADIENT_SAFETY = 1.1


class DecisionSet:
    """A compact convex decision set with a Euclidean projection.

    Parameters
    ----------
    kind : {"euclidean-ball", "probability-simplex", "spectrahedron-adapter"}
    dimension : int
        Ambient dimension ``n``. Spectrahedron decisions are ``n x n``
        matrices and distances are Frobenius.
    radius : float
        Ball radius (ignored for the other kinds).
    """

    KINDS = ("euclidean-ball", "probability-simplex", "spectrahedron-adapter")

    def __init__(self, kind, dimension, radius=1.0):
        if kind not in self.KINDS:
            raise ParameterError(f"unknown decision set kind {kind!r}")
        if int(dimension) < 1:
            raise ParameterError("dimension must be a positive integer")
        if kind == "euclidean-ball" and radius < 0:
            raise ParameterError("radius must be nonnegative")
        self.kind = kind
        self.dimension = int(dimension)
        self.radius = float(radius)

    @classmethod
    def ball(cls, dimension, radius=1.0):
        return cls("euclidean-ball", dimension, radius)

    @classmethod
    def simplex(cls, dimension):
        return cls("probability-simplex", dimension)

    @classmethod
    def spectrahedron(cls, dimension):
        return cls("spectrahedron-adapter", dimension)

    def __repr__(self):
        extra = f", radius={self.radius}" if self.kind == "euclidean-ball" else ""
        return f"DecisionSet({self.kind!r}, {self.dimension}{extra})"

    @property
    def shape(self):
        if self.kind == "spectrahedron-adapter":
            return (self.dimension, self.dimension)
        return (self.dimension,)

    @property
    def diameter(self):
        if self.kind == "euclidean-ball":
            return 2.0 * self.radius
        if self.dimension == 1:
            return 0.0
        return math.sqrt(2.0)

    def centroid(self):
        n = self.dimension
        if self.kind == "euclidean-ball":
            return np.zeros(n)
        if self.kind == "probability-simplex":
            return np.full(n, 1.0 / n)
        return np.eye(n) / n

    def check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            raise ContractViolation(f"decision has shape {x.shape}, expected {self.shape}")
        return x

    def project(self, p):
        p = self.check(p)
        if not np.all(np.isfinite(p)):
            raise NumericalFault("cannot project a non-finite point")
        if self.kind == "euclidean-ball":
            norm = np.linalg.norm(p)
            if norm <= self.radius:
                return p.copy()
            return p * (self.radius / norm)
        if self.kind == "probability-simplex":
            return project_simplex(p)
        return project_spectrahedron(0.5 * (p + p.T))

    def contains(self, x, tol=1e-10):
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            return False
        return np.linalg.norm(self.project(x) - x) <= tol

    def sample(self, rng, size):
        """Draw ``size`` points spread over the set (not necessarily uniform)."""
        n = self.dimension
        if self.kind == "euclidean-ball":
            # half uniform in the ball, half on the sphere where gradients peak
            d = rng.standard_normal((size, n))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            r = rng.random(size) ** (1.0 / n)
            r[: size // 2] = 1.0
            return self.radius * d * r[:, None]
        if self.kind == "probability-simplex":
            return rng.dirichlet(np.ones(n), size=size)
        out = np.empty((size, n, n))
        for k in range(size):
            w = rng.standard_normal((n, n))
            w = w @ w.T
            out[k] = w / np.trace(w)
        return out


class MemoryLoss:
    """A loss over the last ``m`` decisions.

    Subclasses implement :meth:`evaluate` on a window (oldest first) and
    :meth:`unary_gradient`, the gradient of ``g(x) = evaluate([x] * m)``.
    """

    memory = 1

    def evaluate(self, window):
        raise NotImplementedError

    def unary_gradient(self, x):
        raise NotImplementedError

    def unary_value(self, x):
        x = np.asarray(x, dtype=float)
        return self.evaluate(np.repeat(x[None], self.memory, axis=0))


class QuadraticMemoryLoss(MemoryLoss):
    """``f(x_1..x_m) = 0.5 (z - c)^T Q (z - c)`` with ``z = sum_j w_j x_j``.

    The window weights ``w`` are nonnegative and sum to one, so the unary
    restriction is the convex quadratic ``0.5 (x - c)^T Q (x - c)``.
    """

    def __init__(self, center, curvature=None, window_weights=None, memory=1):
        self.center = np.asarray(center, dtype=float)
        n = self.center.size
        self.curvature = np.eye(n) if curvature is None else np.asarray(curvature, dtype=float)
        self.memory = int(memory)
        if window_weights is None:
            window_weights = np.full(self.memory, 1.0 / self.memory)
        self.window_weights = np.asarray(window_weights, dtype=float)
        if self.window_weights.shape != (self.memory,):
            raise ContractViolation("window_weights must have one entry per lag")
        if np.any(self.window_weights < 0) or abs(self.window_weights.sum() - 1.0) > 1e-12:
            raise ParameterError("window_weights must be nonnegative and sum to one")

    def evaluate(self, window):
        window = np.asarray(window, dtype=float)
        if window.shape != (self.memory, self.center.size):
            raise ContractViolation(f"window has shape {window.shape}")
        r = self.window_weights @ window - self.center
        return 0.5 * float(r @ self.curvature @ r)

    def unary_value(self, x):
        r = np.asarray(x, dtype=float) - self.center
        return 0.5 * float(r @ self.curvature @ r)

    def unary_gradient(self, x):
        return self.curvature @ (np.asarray(x, dtype=float) - self.center)

    def lipschitz_bound(self, radius):
        """Gradient bound over a centred ball, valid for both ``f`` and ``g``."""
        q = np.linalg.norm(self.curvature, 2)
        return q * (radius + np.linalg.norm(self.center))


@dataclass
class OgdState:
    """Current decision plus the ``m - 1`` decisions before it."""

    x: np.ndarray
    eta: float
    memory: int
    t: int = 1
    history: deque = field(default=None)

    def __post_init__(self):
        if self.eta < 0:
            raise ParameterError("learning rate must be nonnegative")
        if self.history is None:
            self.history = deque(maxlen=max(self.memory - 1, 0))

    def window(self):
        """The last ``m`` decisions, oldest first, padded with the oldest one known."""
        past = list(self.history)
        pad = self.memory - 1 - len(past)
        first = past[0] if past else self.x
        return np.array([first] * pad + past + [self.x])


def ogd_memory_step(state, loss, decision_set):
    """One projected gradient step on the unary restriction of ``loss``."""
    x = decision_set.check(state.x)
    grad = np.asarray(loss.unary_gradient(x), dtype=float)
    if grad.shape != x.shape:
        raise ContractViolation(f"gradient has shape {grad.shape}, expected {x.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericalFault(f"non-finite gradient at round {state.t}")
    x_next = decision_set.project(x - state.eta * grad)
    history = deque(state.history, maxlen=state.history.maxlen)
    if history.maxlen:
        history.append(x)
    return OgdState(x=x_next, eta=state.eta, memory=state.memory, t=state.t + 1, history=history)


def theorem1_learning_rate(D, G, m, T):
    """Step size ``D / (G sqrt(m T))`` for the memory-OGD regret bound."""
    if D <= 0 or G <= 0:
        raise ParameterError("D and G must be positive")
    if m < 1 or T < m:
        raise ParameterError("need m >= 1 and T >= m")
    return D / (G * math.sqrt(m * T))


def theorem2_learning_rate(D, G, m, T):
    """Step size ``D / (sqrt(m) G T^(3/4))`` used by the portfolio algorithm."""
    if D <= 0 or G <= 0:
        raise ParameterError("D and G must be positive")
    if m < 1 or T < m:
        raise ParameterError("need m >= 1 and T >= m")
    return D / (math.sqrt(m) * G * T ** 0.75)


def regret_bound(G, D, m, T):
    return 2.0 * G * D * math.sqrt(m * T)


class OgdRun:
    """Output of :func:`run_ogd_memory`.

    Attributes
    ----------
    decisions : ndarray, shape (T, ...)
        Played decisions ``x_1..x_T``.
    losses : ndarray, shape (T,)
        ``f_t`` on the played window (padded with ``x_1`` while ``t < m``).
    unary_losses : ndarray, shape (T,)
        ``f_t(x_t, ..., x_t)``.
    """

    def __init__(self, decisions, losses, unary_losses, eta, memory):
        self.decisions = decisions
        self.losses = losses
        self.unary_losses = unary_losses
        self.eta = eta
        self.memory = memory

    def __iter__(self):
        return iter((self.decisions, self.losses))

    def substitution_gaps(self):
        """``|f_t(x_t,..,x_t) - f_t(window)|`` for counted rounds ``t >= m``."""
        m = self.memory
        return np.abs(self.unary_losses[m - 1:] - self.losses[m - 1:])


def run_ogd_memory(losses, decision_set, eta, x1=None):
    """Run OGD with memory over a loss sequence.

    ``x1`` defaults to the centroid of the set. Returns an :class:`OgdRun`
    which unpacks as ``(decisions, losses)``.
    """
    losses = list(losses)
    if not losses:
        raise ParameterError("loss sequence is empty")
    m = losses[0].memory
    if any(f.memory != m for f in losses):
        raise ParameterError("all losses must share the same memory length")
    x1 = decision_set.centroid() if x1 is None else decision_set.check(x1)
    if not decision_set.contains(x1):
        raise ParameterError("x1 is not in the decision set")

    state = OgdState(x=np.array(x1, dtype=float), eta=float(eta), memory=m)
    T = len(losses)
    decisions = np.empty((T,) + decision_set.shape)
    played = np.empty(T)
    unary = np.empty(T)
    for i, f in enumerate(losses):
        decisions[i] = state.x
        played[i] = f.evaluate(state.window())
        unary[i] = f.unary_value(state.x)
        state = ogd_memory_step(state, f, decision_set)
    return OgdRun(decisions, played, unary, float(eta), m)


class _SummedObjective:
    """``F(x) = sum_t g_t(x)`` with a closed form when every loss is quadratic."""

    def __init__(self, losses):
        self.losses = losses
        if all(isinstance(f, QuadraticMemoryLoss) for f in losses):
            Q = sum(f.curvature for f in losses)
            b = sum(f.curvature @ f.center for f in losses)
            c = sum(0.5 * float(f.center @ f.curvature @ f.center) for f in losses)
            self._quad = (Q, b, c)
        else:
            self._quad = None

    def value(self, x):
        if self._quad is not None:
            Q, b, c = self._quad
            return 0.5 * float(x @ Q @ x) - float(b @ x) + c
        return float(sum(f.unary_value(x) for f in self.losses))

    def gradient(self, x):
        if self._quad is not None:
            Q, b, _ = self._quad
            return Q @ x - b
        return sum(np.asarray(f.unary_gradient(x), dtype=float) for f in self.losses)


@dataclass
class ComparatorResult:
    x: np.ndarray
    objective: float
    converged: bool
    iterations: int


def _curvature_estimate(objective, x0, rng_seed=0, iters=50):
    """Power iteration on gradient differences (exact for quadratics)."""
    rng = np.random.default_rng(rng_seed)
    v = rng.standard_normal(x0.shape)
    v /= np.linalg.norm(v)
    g0 = objective.gradient(x0)
    lam = 0.0
    for _ in range(iters):
        hv = objective.gradient(x0 + v) - g0
        nrm = np.linalg.norm(hv)
        if nrm == 0.0:
            return lam
        new = float(np.vdot(v, hv))
        v = hv / nrm
        if abs(new - lam) <= 1e-10 * max(abs(new), 1.0):
            return abs(new)
        lam = new
    return max(abs(lam), nrm)


def offline_comparator(losses, decision_set, tol=1e-8, max_iter=100_000):
    """Best fixed decision in hindsight, ``argmin_x sum_t g_t(x)``.

    Projected gradient descent from the set centroid with step ``1/L``, where
    ``L`` is a power-iteration curvature estimate. The step is halved whenever
    the objective would increase. Stops when the gradient-mapping norm falls
    below ``tol``; otherwise returns the best iterate with ``converged=False``
    and emits a ``RuntimeWarning``.
    """
    losses = list(losses)
    if not losses:
        raise ParameterError("loss sequence is empty")
    objective = _SummedObjective(losses)
    x = decision_set.centroid()
    L = _curvature_estimate(objective, x)
    step = 1.0 / L if L > 0 else 1.0
    fx = objective.value(x)
    for it in range(1, max_iter + 1):
        grad = objective.gradient(x)
        x_new = decision_set.project(x - step * grad)
        mapping = np.linalg.norm(x - x_new) / step
        if mapping < tol:
            return ComparatorResult(x_new, objective.value(x_new), True, it)
        f_new = objective.value(x_new)
        if f_new > fx:
            step *= 0.5
            continue
        x, fx = x_new, f_new
    warnings.warn("offline_comparator hit the iteration cap", RuntimeWarning, stacklevel=2)
    return ComparatorResult(x, fx, False, max_iter)


@dataclass
class RegretTrace:
    """Per-round losses of the learner and the comparator on counted rounds."""

    alg_losses: np.ndarray
    comparator_losses: np.ndarray
    comparator: np.ndarray
    memory: int

    @property
    def cumulative(self):
        return np.cumsum(self.alg_losses - self.comparator_losses)

    @property
    def total(self):
        return float(np.sum(self.alg_losses - self.comparator_losses))

    def to_dict(self):
        return {
            "trace": self.cumulative.tolist(),
            "comparator_objective": float(np.sum(self.comparator_losses)),
        }


def empirical_regret(decisions, comparator, losses):
    """Regret of a played sequence against a fixed comparator.

    ``R_T = sum_{t=m}^T f_t(x_{t-m+1}..x_t) - sum_{t=m}^T f_t(x*, .., x*)``.
    """
    losses = list(losses)
    decisions = np.asarray(decisions, dtype=float)
    if len(decisions) != len(losses):
        raise ContractViolation(
            f"{len(decisions)} decisions but {len(losses)} losses"
        )
    if not losses:
        raise ParameterError("loss sequence is empty")
    m = losses[0].memory
    comparator = np.asarray(comparator, dtype=float)
    alg = []
    ref = []
    for t in range(m - 1, len(losses)):
        alg.append(losses[t].evaluate(decisions[t - m + 1: t + 1]))
        ref.append(losses[t].unary_value(comparator))
    return RegretTrace(np.array(alg), np.array(ref), comparator, m)


def estimate_gradient_bound(losses, decision_set, samples=256, rng=None):
    """Sampled ``max ||grad g_t(x)||`` over the set, times a 1.1 safety factor."""
    if samples < 1:
        raise ParameterError("samples must be at least 1")
    rng = np.random.default_rng(rng)
    points = np.concatenate([decision_set.centroid()[None], decision_set.sample(rng, samples)])
    best = 0.0
    for f in losses:
        for x in points:
            best = max(best, float(np.linalg.norm(f.unary_gradient(x))))
    return GRADIENT_SAFETY * best


def adversarial_quadratics(T, dimension, memory, seed=0, amplitude=1.0, noise=0.1):
    """Alternating-centre quadratic memory losses for regret experiments.

    The centres flip between ``+a`` and ``-a`` (``||a|| = amplitude``) with
    small Gaussian jitter, and each round draws a diagonal curvature in
    ``[0.5, 1]``. Returns ``(losses, G)`` where ``G`` bounds every gradient
    on the unit ball.
    """
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(dimension)
    a *= amplitude / np.linalg.norm(a)
    weights = np.full(memory, 1.0 / memory)
    losses = []
    G = 0.0
    for t in range(T):
        center = (1.0 if t % 2 == 0 else -1.0) * a + noise * rng.standard_normal(dimension)
        diag = rng.uniform(0.5, 1.0, dimension)
        losses.append(QuadraticMemoryLoss(center, np.diag(diag), weights, memory))
        G = max(G, diag.max() * (1.0 + np.linalg.norm(center)))
    return losses, G
