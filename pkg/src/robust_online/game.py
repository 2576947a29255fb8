"""The online game loop, adversaries, transcripts and Monte Carlo risk estimates.

Randomness contract: one ``numpy.random.Generator`` per run, seeded with the run
seed, is consumed in this order:

1. the ground-truth index, when the adversary draws it at random;
2. the adversary's oblivious plan (random features, random mixture weights);
3. a ``(T, 2)`` block of uniforms; column 0 drives the observation draw of each
   round and column 1 the predictor's own randomization.

Because the plan is fixed before the first round, observations are sampled by
inverse CDF up front; the predictor still only sees them one round at a time.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dist import DivergenceKind
from .kernel import (NoiseKernel, SingletonKernel, Tsybakov, UniformMixture, VertexIndex, Worst, gap, sample_from,
                     worst_case_lambdas)
from .pairwise import PairwiseMeta, budget, tsybakov_error_count
from .predictors import HellingerSingleton, L2Reduction, LoglossRR, Predictor

PREDICTORS = ("l2-reduction", "logloss-rr", "hellinger-singleton", "pairwise-meta")


# ---------------------------------------------------------------------------
# hypothesis classes


@dataclass(frozen=True, eq=False)
class HypothesisClass:
    """``labels[k, x]`` is the label hypothesis ``k`` assigns to feature ``x``."""

    labels: np.ndarray
    N: int = 2
    names: tuple | None = None

    def __post_init__(self):
        L = np.array(self.labels, dtype=np.int64)
        if L.ndim != 2 or L.shape[0] < 1 or L.shape[1] < 1:
            raise ValueError(f"labels must be a nonempty K x F table, got shape {L.shape}")
        if L.min() < 0 or L.max() >= self.N:
            raise ValueError(f"labels must lie in [0, {self.N})")
        if self.names is not None and len(self.names) != L.shape[0]:
            raise ValueError("one name per hypothesis")
        L.setflags(write=False)
        object.__setattr__(self, "labels", L)

    @property
    def K(self) -> int:
        return self.labels.shape[0]

    @property
    def F(self) -> int:
        return self.labels.shape[1]

    @classmethod
    def random(cls, K: int, F: int, N: int = 2, seed: int = 0) -> "HypothesisClass":
        """``K`` distinct uniformly random label tables (distinct whenever ``N**F >= K``)."""
        rng = np.random.default_rng(seed)
        L = rng.integers(N, size=(K, F))
        if N ** min(F, 62) >= K:
            for _ in range(1000):
                _, first = np.unique(L, axis=0, return_index=True)
                dup = np.setdiff1d(np.arange(K), first)
                if dup.size == 0:
                    break
                L[dup] = rng.integers(N, size=(dup.size, F))
        return cls(L, N)

    @classmethod
    def cube(cls, tau: int) -> "HypothesisClass":
        """All ``2**tau`` binary labelings of ``tau`` features; bit ``i`` of ``k`` is ``h_k(i)``."""
        if tau < 1:
            raise ValueError("tau must be >= 1")
        k = np.arange(2 ** tau)
        return cls((k[:, None] >> np.arange(tau)[None, :]) & 1, 2)

    @classmethod
    def constant(cls, F: int = 1, N: int = 2) -> "HypothesisClass":
        """``h_k(x) = k`` for every feature."""
        return cls(np.repeat(np.arange(N)[:, None], F, axis=1), N)

    @classmethod
    def explicit(cls, table, N: int | None = None) -> "HypothesisClass":
        L = np.asarray(table)
        return cls(L, int(L.max()) + 1 if N is None else N)


def max_disagreement_feature(hclass: HypothesisClass, survivors_or_weights=None, t: int | None = None) -> int:
    """Feature with the most (weighted) disagreeing hypothesis pairs; ties go to the lowest index."""
    K = hclass.K
    w = np.ones(K) if survivors_or_weights is None else np.asarray(survivors_or_weights, dtype=np.float64)
    if w.shape != (K,):
        raise ValueError(f"need {K} weights")
    if not np.any(w > 0):
        raise ValueError("no plausible hypothesis")
    onehot = hclass.labels[:, :, None] == np.arange(hclass.N)[None, None, :]
    mass = np.einsum("k,kfn->fn", w, onehot)
    score = 0.5 * (w.sum() ** 2 - np.sum(mass ** 2, axis=1))
    return int(np.argmax(score > score.max() - 1e-12))


# ---------------------------------------------------------------------------
# adversaries


@dataclass(frozen=True)
class FixedSequence:
    features: tuple

    def plan(self, hclass, truth, T, rng):
        f = np.asarray(self.features, dtype=np.int64)
        return f[np.arange(T) % f.size]


@dataclass(frozen=True)
class EpochConstant:
    """Feature ``features[e]`` for the whole ``e``-th epoch of ``epoch_len`` rounds."""

    features: tuple
    epoch_len: int

    def plan(self, hclass, truth, T, rng):
        f = np.asarray(self.features, dtype=np.int64)
        return f[np.minimum(np.arange(T) // self.epoch_len, f.size - 1)]


@dataclass(frozen=True)
class UniformFeatures:
    def plan(self, hclass, truth, T, rng):
        return rng.integers(hclass.F, size=T)


@dataclass(frozen=True)
class MaxDisagreement:
    """Oblivious stress schedule.

    The adversary tracks a simulated plausible set, starting from the whole class.
    It repeats the feature with the most disagreeing plausible pairs for ``patience``
    rounds, then drops the hypotheses that contradict the truth there.
    """

    patience: int = 32

    def plan(self, hclass, truth, T, rng):
        plausible = np.ones(hclass.K, dtype=bool)
        out = np.empty(T, dtype=np.int64)
        t = 0
        while t < T:
            if plausible.sum() <= 1:
                plausible[:] = True
            x = max_disagreement_feature(hclass, plausible)
            n = min(self.patience, T - t)
            out[t:t + n] = x
            t += n
            plausible &= hclass.labels[:, x] == hclass.labels[truth, x]
        return out


@dataclass(frozen=True)
class AdversaryStrategy:
    """Oblivious adversary: a feature rule, a noise rule and a ground-truth choice.

    ``noise_rule`` is ``"worst"`` (vertex of the true set closest to the nearest
    opposing set), ``"uniform"`` (fresh Dirichlet mixture each round), or
    ``"vertex:i"``. ``ground_truth`` is an index or ``"random"``.
    """

    feature_rule: object
    noise_rule: str = "worst"
    ground_truth: int | str = "random"

    def __post_init__(self):
        r = self.noise_rule
        if r not in ("worst", "uniform") and not (isinstance(r, str) and r.startswith("vertex:")):
            raise ValueError(f"unknown noise rule {r!r}")


def _worst_point(kernel: NoiseKernel, x: int, y: int, t):
    s = kernel.kernel_set(x, y, t)
    if s.n_vertices == 1:
        return s.vertices[0]
    best = None
    for y2 in range(kernel.N):
        if y2 == y:
            continue
        r = gap(s, kernel.kernel_set(x, y2, t), DivergenceKind.L2SQ)
        if best is None or r.value < best.value:
            best = r
    return np.asarray(sample_from(s, Worst(best.argmin_pair[1])))


class Planner:
    """Caches everything about an experiment that does not depend on the seed."""

    def __init__(self, exp: "Experiment"):
        self.exp = exp
        self._points: dict = {}
        self._noise: dict = {}
        self._features: dict = {}
        self._proto: Predictor | None = None

    def predictor(self, truth: int) -> Predictor:
        if self._proto is None:
            self._proto = make_predictor(self.exp)
        return self._proto.fresh(truth)

    def features(self, truth, rng):
        rule = self.exp.adversary.feature_rule
        if isinstance(rule, UniformFeatures):
            return rule.plan(self.exp.hclass, truth, self.exp.T, rng)
        hit = self._features.get(truth)
        if hit is None:
            hit = self._features[truth] = rule.plan(self.exp.hclass, truth, self.exp.T, rng)
        return hit

    def _point(self, x, y, t):
        k = self.exp.kernel
        key = (x, y, t if k.step_dependent else None)
        hit = self._points.get(key)
        if hit is None:
            rule = self.exp.adversary.noise_rule
            tt = t if k.step_dependent else None
            if rule == "worst":
                hit = _worst_point(k, x, y, tt)
            else:
                hit = np.asarray(sample_from(k.kernel_set(x, y, tt), VertexIndex(int(rule.split(":")[1]))))
            self._points[key] = hit
        return hit

    def noise(self, xs, ys, truth, rng):
        k, T = self.exp.kernel, self.exp.T
        rule = self.exp.adversary.noise_rule
        if rule == "uniform":
            out = np.empty((T, k.M))
            for t in range(T):
                s = k.kernel_set(int(xs[t]), int(ys[t]), t if k.step_dependent else None)
                out[t] = np.asarray(sample_from(s, UniformMixture(), rng))
            return out
        cacheable = not isinstance(self.exp.adversary.feature_rule, UniformFeatures)
        if cacheable and truth in self._noise:
            return self._noise[truth]
        out = np.empty((T, k.M))
        for t in range(T):
            out[t] = self._point(int(xs[t]), int(ys[t]), t)
        if cacheable:
            self._noise[truth] = out
        return out


# ---------------------------------------------------------------------------
# experiments and transcripts


@dataclass
class Experiment:
    hclass: HypothesisClass
    kernel: NoiseKernel
    predictor: str
    adversary: AdversaryStrategy
    T: int
    predictor_params: dict = field(default_factory=dict)
    delta: float = 0.05
    kernel_name: str | None = None

    def __post_init__(self):
        if self.predictor not in PREDICTORS:
            raise ValueError(f"unknown predictor {self.predictor!r}; choose from {PREDICTORS}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.hclass.N > self.kernel.N:
            raise ValueError(f"class has {self.hclass.N} labels, kernel only {self.kernel.N}")
        if self.kernel.F is not None and self.kernel.F < self.hclass.F:
            raise ValueError(f"kernel covers {self.kernel.F} features, class uses {self.hclass.F}")
        if self.kernel.step_dependent and self.kernel.T < self.T:
            raise ValueError(f"kernel defines {self.kernel.T} steps, horizon is {self.T}")
        if self.kernel_name is None:
            self.kernel_name = self.kernel.name


def make_predictor(exp: Experiment) -> Predictor:
    p = dict(exp.predictor_params)
    if exp.predictor == "l2-reduction":
        return L2Reduction(exp.hclass, exp.kernel)
    if exp.predictor == "logloss-rr":
        eta = p.get("eta", getattr(exp.kernel, "eta", None))
        if eta is None:
            raise ValueError("logloss-rr needs eta")
        return LoglossRR(exp.hclass, exp.kernel.M, eta)
    if exp.predictor == "hellinger-singleton":
        return HellingerSingleton(exp.hclass, exp.kernel)
    return PairwiseMeta(exp.hclass, exp.kernel, tester=p.get("tester", "lecam-birge"),
                        delta=p.get("delta", exp.delta), C=p.get("C"))


@dataclass
class GameTranscript:
    seed: int
    predictor: str
    kernel: str
    truth: int
    features: np.ndarray
    true_labels: np.ndarray
    obs: np.ndarray
    predicted: np.ndarray
    guarantee_event_held: bool | None = None
    phat: np.ndarray | None = None
    noise: np.ndarray | None = None

    @property
    def errors(self) -> np.ndarray:
        return (self.predicted != self.true_labels).astype(np.int64)

    @property
    def cum_errors(self) -> int:
        return int(self.errors.sum())

    @property
    def T(self) -> int:
        return self.features.size

    @property
    def steps(self):
        e = self.errors
        return [(t, int(self.features[t]), int(self.true_labels[t]), int(self.obs[t]),
                 int(self.predicted[t]), int(e[t])) for t in range(self.T)]

    def tobytes(self) -> bytes:
        parts = [np.asarray([self.seed, self.truth]), self.features, self.true_labels, self.obs, self.predicted]
        return b"".join(np.ascontiguousarray(a, dtype=np.int64).tobytes() for a in parts)


def _draw_obs(P: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(P, axis=1)
    return np.minimum((cdf <= u[:, None]).sum(axis=1), P.shape[1] - 1)


def run_game(exp: Experiment, seed: int, planner: Planner | None = None, record: bool = False,
             check_legal: bool = False, stepwise: bool = False) -> GameTranscript:
    """Play one game of ``exp.T`` rounds.

    ``record`` keeps the learner's mixtures and the adversary's noise laws;
    ``check_legal`` verifies every noise law lies in its kernel set; ``stepwise``
    drives the predictor object round by round instead of the compiled loop.
    """
    planner = planner or Planner(exp)
    rng = np.random.default_rng(seed)
    gt = exp.adversary.ground_truth
    truth = int(rng.integers(exp.hclass.K)) if gt == "random" else int(gt)
    if not 0 <= truth < exp.hclass.K:
        raise IndexError(f"ground truth {truth} out of range")
    xs = planner.features(truth, rng)
    ys = exp.hclass.labels[truth, xs]
    P = planner.noise(xs, ys, truth, rng)
    U = rng.random((exp.T, 2))
    obs = _draw_obs(P, U[:, 0])
    if check_legal:
        k = exp.kernel
        for t in range(exp.T):
            s = k.kernel_set(int(xs[t]), int(ys[t]), t if k.step_dependent else None)
            if not s.contains(P[t], tol=1e-7):
                raise AssertionError(f"noise law at step {t} leaves its kernel set")
    pred = planner.predictor(truth)
    u1 = U[:, 1]
    batch = None if stepwise else pred.run_batch(xs, obs, u1, record)
    if batch is not None:
        yhat, phat = batch
    else:
        yhat = np.empty(exp.T, dtype=np.int64)
        phat = np.zeros((exp.T, exp.kernel.M)) if record else None
        for t in range(exp.T):
            x = int(xs[t])
            yhat[t] = pred.predict(x, t, u1[t])
            if record and pred.phat is not None:
                phat[t] = pred.phat
            pred.update(x, t, int(obs[t]))
    event = pred.event_held()
    return GameTranscript(seed, exp.predictor, exp.kernel_name, truth, np.asarray(xs), np.asarray(ys),
                          obs, yhat, event, phat, P if record else None)


# ---------------------------------------------------------------------------
# Monte Carlo


def order_statistic_quantile(values, delta: float) -> float:
    """The ``ceil((1 - delta) * n)``-th smallest value."""
    v = np.sort(np.asarray(values))
    k = max(1, math.ceil((1.0 - delta) * v.size - 1e-9))
    return float(v[k - 1])


@dataclass
class RiskSummary:
    runs: int
    mean: float
    quantiles: dict
    cum_errors: np.ndarray
    seeds: np.ndarray
    events: list
    truths: np.ndarray
    per_T_curve: list | None = None

    @property
    def median(self) -> float:
        return float(np.median(self.cum_errors))

    def quantile(self, delta: float) -> float:
        return order_statistic_quantile(self.cum_errors, delta)


def _run_chunk(args):
    exp, seeds = args
    planner = Planner(exp)
    out = []
    for s in seeds:
        tr = run_game(exp, int(s), planner)
        out.append((tr.cum_errors, tr.guarantee_event_held, tr.truth))
    return out


def monte_carlo(exp: Experiment, runs: int, seed0: int = 0, deltas: Sequence[float] = (0.05,),
                jobs: int = 1) -> RiskSummary:
    """Run seeds ``seed0 .. seed0 + runs - 1`` and aggregate the cumulative errors."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    seeds = np.arange(seed0, seed0 + runs)
    if jobs > 1 and runs > 1:
        chunks = [c for c in np.array_split(seeds, jobs) if c.size]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = [r for part in pool.map(_run_chunk, [(exp, c) for c in chunks]) for r in part]
    else:
        planner = Planner(exp)
        results = []
        for i, s in enumerate(seeds):
            try:
                tr = run_game(exp, int(s), planner)
            except Exception as err:
                raise RuntimeError(f"run {i} (seed {s}) failed: {err}") from err
            results.append((tr.cum_errors, tr.guarantee_event_held, tr.truth))
    errs = np.array([r[0] for r in results], dtype=np.int64)
    return RiskSummary(runs, float(errs.mean()), {d: order_statistic_quantile(errs, d) for d in deltas},
                       errs, seeds, [r[1] for r in results], np.array([r[2] for r in results]))


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(xs, dtype=float)), np.log(np.maximum(np.asarray(ys, dtype=float), 1e-12))
    return float(np.polyfit(lx, ly, 1)[0])


# ---------------------------------------------------------------------------
# canonical instances


def bernoulli_eps_for_hellinger(gamma_H: float) -> float:
    """``eps`` with ``H^2(Bern(1/2 - eps), Bern(1/2 + eps)) = gamma_H``."""
    if not 0.0 < gamma_H <= 2.0:
        raise ValueError(f"a binary Hellinger gap must lie in (0, 2], got {gamma_H}")
    # H^2 = 2 - 2 sqrt(1 - 4 eps^2)
    return 0.5 * math.sqrt(max(0.0, 1.0 - (1.0 - gamma_H / 2.0) ** 2))


def _bern_pair_table(eps) -> np.ndarray:
    eps = np.atleast_1d(np.asarray(eps, dtype=np.float64))
    q0 = np.stack([0.5 + eps, 0.5 - eps], axis=1)
    q1 = q0[:, ::-1]
    return np.stack([q0, q1], axis=1)


def build_lower_bound_instance(tau: int, gamma_H: float, T: int):
    """Cube class over ``tau`` features, one epoch of ``T / tau`` rounds per feature,
    and observations ``Bern(1/2 -+ eps)`` at Hellinger gap ``gamma_H``."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if T % tau:
        raise ValueError(f"T={T} is not divisible by tau={tau}")
    eps = bernoulli_eps_for_hellinger(gamma_H)
    hclass = HypothesisClass.cube(tau)
    kernel = SingletonKernel(_bern_pair_table(np.full(tau, eps)))
    adversary = AdversaryStrategy(EpochConstant(tuple(range(tau)), T // tau), "worst", "random")
    return hclass, kernel, adversary


def soft_gaps(T: int, alpha: float, A: float = 1.0) -> np.ndarray:
    """Ascending per-step Hellinger gaps ``min((t / (A T))^((1 - alpha) / alpha), 1)``."""
    return worst_case_lambdas(T, alpha, A)


def build_soft_gap_instance(T: int, alpha: float, A: float = 1.0, delta: float = 0.05):
    """Two constant hypotheses, a fresh feature per round, and per-round singleton gaps
    that grow as a power of ``t``. Returns the experiment pieces and the threshold ``C``."""
    g = soft_gaps(T, alpha, A)
    eps = np.array([bernoulli_eps_for_hellinger(v) for v in g])
    hclass = HypothesisClass.constant(T, 2)
    kernel = SingletonKernel(_bern_pair_table(eps))
    adversary = AdversaryStrategy(FixedSequence(tuple(range(T))), "worst", "random")
    C = budget(g, delta / (2 * hclass.K))
    return hclass, kernel, adversary, C


def build_tsybakov_instance(T: int, alpha: float, A: float = 1.0, delta: float = 0.05):
    """Two constant hypotheses under the worst-case Tsybakov sequence; ``C`` is the
    empirical-mean tester's error count bound at confidence ``delta / (2K)``."""
    kernel = Tsybakov.worst_case(T, alpha, A)
    hclass = HypothesisClass.constant(1, 2)
    adversary = AdversaryStrategy(FixedSequence((0,)), "worst", "random")
    C = tsybakov_error_count(kernel.lambdas, delta / (2 * hclass.K))
    return hclass, kernel, adversary, C
