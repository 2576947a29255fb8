"""Probability vectors over a finite observation alphabet, divergences between
them, and the exp-concave losses used by the exponential-weights estimator.

All divergences take array-likes (including :class:`Distribution`) and work in
64-bit floating point. KL and Renyi return ``math.inf`` on support violations
rather than raising, because the likelihood-ratio testers need total functions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

CLAMP = 1e-15
RENORM_TOL = 1e-9


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector over ``M >= 2`` symbols.

    Entries below ``1e-15`` are clamped to zero; a vector whose sum is within
    ``1e-9`` of one is renormalized, anything else is rejected.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64).reshape(-1)
        if p.size < 2:
            raise ValueError(f"need at least 2 symbols, got {p.size}")
        if not np.all(np.isfinite(p)) or np.any(p < -CLAMP):
            raise ValueError(f"entries must be finite and nonnegative: {p}")
        p[p < CLAMP] = 0.0
        total = p.sum()
        if abs(total - 1.0) > RENORM_TOL:
            raise ValueError(f"entries sum to {total!r}, not 1")
        p = p / total
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def M(self) -> int:
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.probs
        return self.probs.astype(dtype)

    def __len__(self):
        return self.probs.size

    def __getitem__(self, m):
        return self.probs[m]

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.M == other.M and bool(np.all(self.probs == other.probs))

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        body = ", ".join(f"{v:.6g}" for v in self.probs)
        return f"Distribution([{body}])"

    def allclose(self, other, atol=1e-12) -> bool:
        other = np.asarray(other, dtype=np.float64)
        return other.shape == self.probs.shape and bool(np.allclose(self.probs, other, atol=atol, rtol=0))

    @classmethod
    def point_mass(cls, m: int, M: int) -> "Distribution":
        if not 0 <= m < M:
            raise IndexError(f"symbol {m} out of range for M={M}")
        p = np.zeros(M)
        p[m] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, M: int) -> "Distribution":
        return cls(np.full(M, 1.0 / M))

    @classmethod
    def bernoulli(cls, t: float) -> "Distribution":
        """Two-symbol distribution with mass ``t`` on symbol 1."""
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"Bernoulli parameter {t} outside [0, 1]")
        return cls(np.array([1.0 - t, t]))

    @classmethod
    def mixture(cls, weights, points) -> "Distribution":
        w = np.asarray(weights, dtype=np.float64)
        P = np.asarray([np.asarray(q, dtype=np.float64) for q in points])
        return cls(w @ P)


def as_probs(p) -> np.ndarray:
    return np.asarray(p, dtype=np.float64)


def _pair(p, q):
    p, q = as_probs(p), as_probs(q)
    if p.shape != q.shape:
        raise DimensionError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return p, q


# ---------------------------------------------------------------------------
# divergences


def l2_sq(p, q) -> float:
    """Squared Euclidean distance ``sum_m (p[m] - q[m])**2``."""
    p, q = _pair(p, q)
    d = p - q
    return float(d @ d)


def hellinger_sq(p, q) -> float:
    """Squared Hellinger distance ``sum_m (sqrt p[m] - sqrt q[m])**2``, in [0, 2]."""
    p, q = _pair(p, q)
    d = np.sqrt(p) - np.sqrt(q)
    return float(min(d @ d, 2.0))


def kl(p, q) -> float:
    p, q = _pair(p, q)
    s = p > 0
    if np.any(q[s] <= 0):
        return math.inf
    return float(max(np.sum(p[s] * np.log(p[s] / q[s])), 0.0))


def tv(p, q) -> float:
    p, q = _pair(p, q)
    return float(0.5 * np.abs(p - q).sum())


def renyi(order: float, p, q) -> float:
    """Renyi divergence ``log(sum p^a q^(1-a)) / (a - 1)`` for ``a`` not 1."""
    if not order > 0 or order == 1 or not math.isfinite(order):
        raise ValueError(f"Renyi order must lie in (0,1) or (1,inf), got {order}")
    p, q = _pair(p, q)
    if order > 1 and np.any((p > 0) & (q <= 0)):
        return math.inf
    s = (p > 0) & (q > 0)
    z = float(np.sum(p[s] ** order * q[s] ** (1.0 - order)))
    if z <= 0.0:
        return math.inf
    return max(math.log(z) / (order - 1.0), 0.0)


class DivergenceKind(enum.Enum):
    L2SQ = "l2sq"
    KL = "kl"
    HELLINGER_SQ = "hellinger_sq"
    TV = "tv"

    @property
    def symmetric(self) -> bool:
        return self is not DivergenceKind.KL

    def __call__(self, p, q) -> float:
        return _DIVERGENCES[self](p, q)

    @classmethod
    def parse(cls, name: str) -> "DivergenceKind":
        key = name.lower().replace("-", "_")
        aliases = {"l2": "l2sq", "l2_sq": "l2sq", "h2": "hellinger_sq", "hellinger": "hellinger_sq"}
        return cls(aliases.get(key, key))


_DIVERGENCES = {
    DivergenceKind.L2SQ: l2_sq,
    DivergenceKind.KL: kl,
    DivergenceKind.HELLINGER_SQ: hellinger_sq,
    DivergenceKind.TV: tv,
}


@dataclass(frozen=True)
class Renyi:
    order: float

    def __post_init__(self):
        if not self.order > 0 or self.order == 1:
            raise ValueError(f"Renyi order must lie in (0,1) or (1,inf), got {self.order}")

    symmetric = False

    def __call__(self, p, q) -> float:
        return renyi(self.order, p, q)


# ---------------------------------------------------------------------------
# losses


class LossKind(enum.Enum):
    LOG = "log"
    BRIER = "brier"


_ALPHA = {LossKind.LOG: 1.0, LossKind.BRIER: 0.25}


@dataclass(frozen=True)
class LossSpec:
    """A loss together with its exp-concavity constant (1 for log, 1/4 for Brier)."""

    kind: LossKind
    alpha: float = field(default=None)

    def __post_init__(self):
        kind = LossKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.alpha is None:
            object.__setattr__(self, "alpha", _ALPHA[kind])
        elif self.alpha != _ALPHA[kind]:
            raise ValueError(f"{kind.value} loss is {_ALPHA[kind]}-exp-concave, got alpha={self.alpha}")

    @classmethod
    def log(cls) -> "LossSpec":
        return cls(LossKind.LOG)

    @classmethod
    def brier(cls) -> "LossSpec":
        return cls(LossKind.BRIER)


def loss(spec: LossSpec, obs: int, p) -> float:
    """Log loss ``-log p[obs]`` or Brier loss ``||e_obs - p||^2``."""
    p = as_probs(p)
    if not 0 <= obs < p.size:
        raise IndexError(f"observation {obs} out of range for M={p.size}")
    if spec.kind is LossKind.LOG:
        return -math.log(p[obs]) if p[obs] > 0 else math.inf
    d = -p.copy()
    d[obs] += 1.0
    return float(d @ d)


def loss_table(spec: LossSpec, P) -> np.ndarray:
    """Losses for every observation: ``out[..., m] = loss(spec, m, P[..., :])``."""
    P = np.asarray(P, dtype=np.float64)
    if spec.kind is LossKind.LOG:
        with np.errstate(divide="ignore"):
            return -np.log(P)
    sq = np.sum(P * P, axis=-1, keepdims=True)
    return sq - 2.0 * P + 1.0


# ---------------------------------------------------------------------------
# randomized property checks


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst: float
    trials: int
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"[{status}] {self.name}: worst slack {self.worst:.3e} over {self.trials} trials{extra}"


def random_distribution(rng: np.random.Generator, M: int, floor: float = 0.0) -> np.ndarray:
    """Dirichlet(1) draw, optionally mixed with the uniform vector so every entry is >= floor."""
    p = rng.dirichlet(np.ones(M))
    if floor > 0:
        p = (1.0 - M * floor) * p + floor
    return p


def check_exp_concavity(spec: LossSpec, trials: int = 1000, rng_seed: int = 0,
                        alpha: float | None = None, M: int | None = None,
                        slack: float = 1e-12) -> CheckReport:
    """Sample (obs, p, q, lam) and test Jensen's inequality for ``exp(-alpha * loss)``.

    ``alpha`` overrides the loss's own constant, e.g. to show Brier loss is not 1-exp-concave.
    The reported ``worst`` is the minimum of lhs - rhs; negative means a violation.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    a = spec.alpha if alpha is None else float(alpha)
    rng = np.random.default_rng(rng_seed)
    worst = math.inf
    for _ in range(trials):
        m_dim = M if M is not None else int(rng.integers(2, 6))
        p = random_distribution(rng, m_dim)
        q = random_distribution(rng, m_dim)
        lam = rng.random()
        y = int(rng.integers(m_dim))
        mix = lam * p + (1.0 - lam) * q
        lhs = math.exp(-a * loss(spec, y, mix))
        rhs = lam * math.exp(-a * loss(spec, y, p)) + (1.0 - lam) * math.exp(-a * loss(spec, y, q))
        worst = min(worst, lhs - rhs)
    return CheckReport(f"exp-concavity {spec.kind.value} alpha={a:g}", worst >= -slack, worst, trials)


def bregman_three_point_check(divergence: DivergenceKind, trials: int = 500, rng_seed: int = 0,
                              support_floor: float = 0.01, atol: float = 1e-10) -> CheckReport:
    """Check ``E_P[L(p,q1) - L(p,q2)] = L(E p, q1) - L(E p, q2)`` on random finite mixtures."""
    if divergence not in (DivergenceKind.L2SQ, DivergenceKind.KL):
        raise ValueError("three-point identity holds for Bregman divergences (L2SQ, KL)")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    L = divergence
    floor = support_floor if divergence is DivergenceKind.KL else 0.0
    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    for _ in range(trials):
        M = int(rng.integers(2, 6))
        n = int(rng.integers(1, 6))
        atoms = np.array([random_distribution(rng, M, floor) for _ in range(n)])
        w = rng.dirichlet(np.ones(n))
        q1 = random_distribution(rng, M, floor)
        q2 = random_distribution(rng, M, floor)
        lhs = sum(wi * (L(a, q1) - L(a, q2)) for wi, a in zip(w, atoms))
        mean = w @ atoms
        rhs = L(mean, q1) - L(mean, q2)
        worst = max(worst, abs(lhs - rhs))
    return CheckReport(f"three-point identity {divergence.value}", worst <= atol, worst, trials)
