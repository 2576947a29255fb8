"""Two-hypothesis testers, the elimination meta-predictor over all pairs, and the
exact Bayes risk of the two-point problem.

Pair ``(i, j)`` with ``i < j`` is always tested as "h_i (decision 1) versus h_j
(decision 2)".
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dist import DivergenceKind, as_probs
from .kernel import NoiseKernel, gap
from . import _fast
from .predictors import Predictor

log = logging.getLogger(__name__)


class InsufficientGapError(ValueError):
    pass


def budget(gammas: Sequence[float], delta: float) -> int:
    """Smallest ``n`` with ``gammas[0] + ... + gammas[n-1] >= 2 log(2 / delta)``."""
    g = np.asarray(gammas, dtype=np.float64)
    if np.any(g < 0):
        raise ValueError("gaps must be nonnegative")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    target = 2.0 * math.log(2.0 / delta)
    cs = np.cumsum(g)
    hit = np.nonzero(cs >= target * (1.0 - 1e-12))[0]
    if hit.size == 0:
        total = float(cs[-1]) if cs.size else 0.0
        raise InsufficientGapError(f"total gap {total:.6g} over {g.size} steps is below {target:.6g}")
    return int(hit[0]) + 1


def gap_target(delta: float) -> float:
    return 2.0 * math.log(2.0 / delta)


def pair_threshold(gamma_H: float, K: int, delta: float) -> int:
    """Error count ``C = ceil(2 log(4K / delta) / gamma_H)`` of a pair tester run at ``delta / (2K)``."""
    if gamma_H <= 0:
        raise InsufficientGapError("Hellinger gap must be positive")
    return math.ceil(gap_target(delta / (2 * K)) / gamma_H - 1e-12)


def tsybakov_error_count(lambdas: Sequence[float], delta: float) -> int:
    """``sum_t 1{sum_{j<t} lambda_j <= sqrt(2 t log(T / delta))}`` for ``t = 1..T``."""
    lam = np.asarray(lambdas, dtype=np.float64)
    T = lam.size
    prefix = np.concatenate([[0.0], np.cumsum(lam)[:-1]])
    t = np.arange(1, T + 1)
    return int(np.sum(prefix <= np.sqrt(2.0 * t * math.log(T / delta))))


# ---------------------------------------------------------------------------
# single pair testers


class TesterKind(enum.Enum):
    LECAM_BIRGE = "lecam-birge"
    EMPIRICAL_MEAN = "empirical-mean"


@dataclass(frozen=True)
class PairTester:
    """State of one pair test.

    A Le Cam-Birge tester decides once ``budget`` disagreement steps have been seen,
    or once the accumulated per-step gaps reach ``target`` when a target is given,
    and then never changes. An empirical-mean tester re-decides every step.
    """

    kind: TesterKind
    budget: int | None = None
    target: float | None = None
    lr_log: float = 0.0
    steps: int = 0
    gap_sum: float = 0.0
    count: int = 0
    total: float = 0.0
    decided: int | None = None

    @classmethod
    def lecam_birge(cls, budget: int | None = None, target: float | None = None) -> "PairTester":
        if (budget is None) == (target is None):
            raise ValueError("give exactly one of budget or target")
        if budget is not None and budget < 1:
            raise ValueError("budget must be >= 1")
        return cls(TesterKind.LECAM_BIRGE, budget=budget, target=target)

    @classmethod
    def empirical_mean(cls) -> "PairTester":
        return cls(TesterKind.EMPIRICAL_MEAN)

    @property
    def prediction(self) -> int:
        """Current side: 1 for h_i, 2 for h_j. Undecided Le Cam-Birge testers say 1."""
        if self.kind is TesterKind.EMPIRICAL_MEAN:
            return 1 if self.count == 0 or self.total <= self.count / 2 else 2
        return 1 if self.decided is None else self.decided


def _llr_increment(p, q, obs) -> float:
    a, b = float(p[obs]), float(q[obs])
    if a == 0.0 and b == 0.0:
        return 0.0
    if b == 0.0:
        return math.inf
    if a == 0.0:
        return -math.inf
    return math.log(a) - math.log(b)


def lecam_birge_step(t: PairTester, p_star, q_star, obs: int, gamma: float | None = None) -> PairTester:
    """Add ``log p*[obs] - log q*[obs]`` and decide when the budget is reached (ties to 1)."""
    if t.kind is not TesterKind.LECAM_BIRGE:
        raise TypeError("not a Le Cam-Birge tester")
    if t.decided is not None:
        log.debug("step on a decided tester ignored")
        return t
    p, q = as_probs(p_star), as_probs(q_star)
    if not 0 <= obs < p.size:
        raise IndexError(f"observation {obs} out of range for M={p.size}")
    if gamma is None:
        gamma = float(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2))
    lr = t.lr_log + _llr_increment(p, q, obs)
    if math.isnan(lr):
        lr = 0.0
    steps, gsum = t.steps + 1, t.gap_sum + gamma
    done = steps >= t.budget if t.budget is not None else gsum >= t.target * (1.0 - 1e-12)
    decided = (1 if lr >= 0 else 2) if done else None
    return replace(t, lr_log=lr, steps=steps, gap_sum=gsum, decided=decided)


def empirical_mean_step(t: PairTester, matches_h2: int) -> PairTester:
    if t.kind is not TesterKind.EMPIRICAL_MEAN:
        raise TypeError("not an empirical-mean tester")
    count, total = t.count + 1, t.total + (1 if matches_h2 else 0)
    nt = replace(t, count=count, total=total)
    return replace(nt, decided=nt.prediction)


def surrogate_loss(i: int, j: int, tester_prediction: int, h_i_label: int, h_j_label: int) -> int:
    """1 iff ``h_i`` and ``h_j`` disagree and the pair tester did not side with ``h_i``."""
    return int(h_i_label != h_j_label and tester_prediction != h_i_label)


# ---------------------------------------------------------------------------
# elimination meta-predictor


class PairTables:
    """Per-feature least-favorable pairs: ``logp[a, b]`` is the log of the point of
    ``Q_a`` closest in Hellinger distance to ``Q_b``; ``G[a, b]`` is the gap."""

    def __init__(self, kernel: NoiseKernel):
        self.kernel = kernel
        self._cache: dict = {}

    def get(self, x: int, t: int | None = None):
        key = (x, t if self.kernel.step_dependent else None)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        k, N, M = self.kernel, self.kernel.N, self.kernel.M
        logp = np.zeros((N, N, M))
        G = np.zeros((N, N))
        tt = t if k.step_dependent else None
        for a, b in itertools.combinations(range(N), 2):
            r = gap(k.kernel_set(x, a, tt), k.kernel_set(x, b, tt), DivergenceKind.HELLINGER_SQ)
            with np.errstate(divide="ignore"):
                logp[a, b] = np.log(np.asarray(r.argmin_pair[0]))
                logp[b, a] = np.log(np.asarray(r.argmin_pair[1]))
            G[a, b] = G[b, a] = r.value
        self._cache[key] = (logp, G)
        return logp, G

    def full(self, F: int):
        """Stacked tables for features ``0 .. F-1``: shapes ``(F, N, N, M)`` and ``(F, N, N)``."""
        if getattr(self, "_full", None) is None or self._full[0].shape[0] < F:
            parts = [self.get(x) for x in range(F)]
            self._full = (np.stack([p[0] for p in parts]), np.stack([p[1] for p in parts]))
        return self._full

    def gamma_H(self, features: Sequence[int]) -> float:
        off = ~np.eye(self.kernel.N, dtype=bool)
        return min(float(np.min(self.get(x)[1][off])) for x in features)


class PairwiseMeta(Predictor):
    """Random survivor prediction with elimination by pairwise surrogate losses.

    Every step the prediction is ``h_k(x)`` for ``k`` uniform over the survivors.
    After the observation, each pair tester that sees a disagreement charges a unit
    surrogate loss to the hypothesis it currently rules against, and hypotheses whose
    worst pairwise count exceeds ``C`` are removed.

    Parameters
    ----------
    hclass
        Object with ``labels`` of shape ``(K, F)``.
    kernel
        Noise kernel; needed by Le Cam-Birge testers.
    tester : {"lecam-birge", "empirical-mean"}
    delta : float
        Overall confidence; pair testers run at ``delta / (2K)``.
    C : int, optional
        Elimination threshold. Defaults to ``pair_threshold(gamma_H, K, delta)``.
    truth : int, optional
        Index of the ground truth, used only to audit whether it was ever at risk.
    """

    name = "pairwise-meta"

    def __init__(self, hclass, kernel: NoiseKernel | None = None, tester: str = "lecam-birge",
                 delta: float = 0.05, C: int | None = None, truth: int | None = None):
        self.labels = np.asarray(hclass.labels)
        K = self.labels.shape[0]
        self.K = K
        self.kind = TesterKind(tester)
        if not 0.0 < delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {delta}")
        self.delta = float(delta)
        self.target = gap_target(delta / (2 * K))
        if self.kind is TesterKind.LECAM_BIRGE:
            if kernel is None:
                raise ValueError("Le Cam-Birge testers need the noise kernel")
            self.tables = PairTables(kernel)
        if C is None:
            if self.kind is not TesterKind.LECAM_BIRGE:
                raise ValueError("empirical-mean testers need an explicit threshold C")
            C = pair_threshold(self.tables.gamma_H(range(self.labels.shape[1])), K, delta) if K > 1 else 0
        self.C = int(C)
        self.upper = np.triu(np.ones((K, K), dtype=bool), 1)
        self._reset(truth)

    def _reset(self, truth):
        K = self.K
        self.truth = truth
        self.phat = None
        self.survivors = np.ones(K, dtype=bool)
        self.cum_v = np.zeros((K, K), dtype=np.int64)
        self.lr = np.zeros((K, K))
        self.gsum = np.zeros((K, K))
        self.decided = np.zeros((K, K), dtype=bool)
        self.count = np.zeros((K, K), dtype=np.int64)
        self.total = np.zeros((K, K), dtype=np.int64)
        # favors[i, j]: the (i, j) tester currently sides with h_i
        self.favors = self.upper.copy()
        self.emptied = False
        self._k = 0

    def survivor_indices(self) -> np.ndarray:
        return np.flatnonzero(self.survivors)

    def predict(self, x, t, u):
        idx = np.flatnonzero(self.survivors)
        self._k = int(idx[min(int(u * idx.size), idx.size - 1)])
        return int(self.labels[self._k, x])

    def update(self, x, t, obs):
        lab = self.labels[:, x]
        D = lab[:, None] != lab[None, :]
        if not D.any():
            return
        self.cum_v += D & ~self.favors
        if self.kind is TesterKind.LECAM_BIRGE:
            logp, G = self.tables.get(x, t)
            live = D & ~self.decided
            lp = logp[lab[:, None], lab[None, :], obs]
            with np.errstate(invalid="ignore"):
                inc = lp - lp.T
            inc[np.isnan(inc)] = 0.0
            self.lr += np.where(live, inc, 0.0)
            self.lr[np.isnan(self.lr)] = 0.0
            self.gsum += np.where(live, G[lab[:, None], lab[None, :]], 0.0)
            newly = live & (self.gsum >= self.target * (1.0 - 1e-12))
            if newly.any():
                self.decided |= newly
                up = newly & self.upper
                win = self.lr >= 0
                self.favors = np.where(up, win, self.favors)
                self.favors = np.where(up.T, ~win.T, self.favors)
        else:
            # relabel so that the bit is 1 when the observation matches h_j
            self.count += D
            self.total += D & (obs == lab[None, :])
            ok = (self.count == 0) | (2 * self.total <= self.count)
            self.favors = np.where(self.upper, ok, ~ok.T)
        keep = self.survivors & (self.cum_v.max(axis=1) <= self.C)
        if keep.any():
            self.survivors = keep
        else:
            self.emptied = True

    def run_batch(self, xs, obs, u, record=False):
        """Play a whole run in compiled code; returns predictions and ``None``."""
        lecam = self.kind is TesterKind.LECAM_BIRGE
        if lecam and self.tables.kernel.step_dependent:
            return None
        if lecam:
            logp, G = self.tables.full(self.labels.shape[1])
        else:
            logp, G = np.zeros((1, 1, 1, 1)), np.zeros((1, 1, 1))
        yhat, cum_v, surv, emptied = _fast.meta_run(
            self.labels, np.asarray(xs, dtype=np.int64), np.asarray(obs, dtype=np.int64),
            np.asarray(u, dtype=np.float64), lecam, logp, G, self.target, self.C)
        self.cum_v, self.survivors, self.emptied = cum_v, surv, bool(emptied)
        return yhat, None

    @property
    def l(self) -> np.ndarray:
        return self.cum_v.max(axis=1)

    def event_held(self) -> bool | None:
        """Whether every tester involving the truth stayed within ``C`` errors."""
        if self.truth is None:
            return None
        return bool(self.cum_v[self.truth].max() <= self.C)


# ---------------------------------------------------------------------------
# exact two-point Bayes risk


def _multinomial(counts) -> int:
    out, n = 1, 0
    for c in counts:
        n += c
        out *= math.comb(n, c)
    return out


def _compositions(n: int, M: int):
    for cut in itertools.combinations(range(n + M - 1), M - 1):
        prev, out = -1, []
        for c in cut:
            out.append(c - prev - 1)
            prev = c
        out.append(n + M - 1 - prev - 1)
        yield out


def bayes_oracle(q, q_prime, T: int, max_histories: int = 256) -> float:
    """Expected cumulative error of the Bayes-optimal learner on the two-point problem.

    Nature picks ``h_1`` or ``h_2`` with probability 1/2; every step the labels
    disagree and observations are i.i.d. from ``q`` under ``h_1`` and from ``q_prime``
    under ``h_2``. The learner predicting the more likely hypothesis errs at step
    ``t`` with probability ``sum_hist min(q^(t-1)(hist), q'^(t-1)(hist)) / 2``; the
    sum runs over observation counts rather than sequences.
    """
    q, qp = as_probs(q), as_probs(q_prime)
    if q.shape != qp.shape:
        raise ValueError("dimension mismatch")
    M = q.size
    if T < 1:
        raise ValueError("T must be >= 1")
    if M ** T > max_histories:
        raise ValueError(f"instance too large: {M}^{T} histories exceeds {max_histories}")
    risk = 0.0
    for n in range(T):
        s = 0.0
        for c in _compositions(n, M):
            a = math.prod(float(q[m]) ** c[m] for m in range(M))
            b = math.prod(float(qp[m]) ** c[m] for m in range(M))
            s += _multinomial(c) * min(a, b)
        risk += 0.5 * s
    return risk


def bayes_oracle_exhaustive(q, q_prime, T: int) -> float:
    """Same quantity as :func:`bayes_oracle` by explicit enumeration of every history."""
    q, qp = as_probs(q), as_probs(q_prime)
    M = q.size
    risk = 0.0
    for n in range(T):
        for hist in itertools.product(range(M), repeat=n):
            a = math.prod(float(q[m]) for m in hist)
            b = math.prod(float(qp[m]) for m in hist)
            risk += 0.5 * min(a, b)
    return risk
