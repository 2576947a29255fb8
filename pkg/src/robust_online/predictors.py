"""Exponential weights over distribution-valued experts and the predictors built on it.

Weights live in the log domain and are shifted so the largest is 0 after every
update. A log weight of ``-inf`` is an eliminated expert and contributes nothing
to the mixture.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dist import Distribution, DivergenceKind, LossSpec, as_probs, loss_table
from . import _fast
from .kernel import NoiseKernel, RandomizedResponse, Singleton, gap


@dataclass(frozen=True)
class ExpertFunction:
    """Expert ``f`` with ``f(x) = table[x]``; ``table`` has shape ``(F, M)``."""

    id: int
    table: np.ndarray

    def __post_init__(self):
        T = np.array(self.table, dtype=np.float64)
        if T.ndim != 2:
            raise ValueError("expert table must have shape (F, M)")
        for row in T:
            Distribution(row)
        T.setflags(write=False)
        object.__setattr__(self, "table", T)

    def dist_for(self, x: int) -> Distribution:
        return Distribution(self.table[x])


def expert_tensor(experts) -> np.ndarray:
    """Stack experts into a ``(K, F, M)`` array; arrays pass through unchanged."""
    if isinstance(experts, np.ndarray):
        E = experts
    else:
        experts = list(experts)
        if not experts:
            raise ValueError("expert list is empty")
        E = np.stack([e.table if isinstance(e, ExpertFunction) else np.asarray(e) for e in experts])
    if E.ndim != 3 or E.shape[0] == 0:
        raise ValueError(f"expected a nonempty (K, F, M) expert array, got shape {E.shape}")
    return E


@dataclass(frozen=True)
class EwaState:
    log_weights: np.ndarray
    loss_spec: LossSpec
    round: int = 0

    @classmethod
    def initial(cls, K: int, loss_spec: LossSpec) -> "EwaState":
        if K < 1:
            raise ValueError("need at least one expert")
        return cls(np.zeros(K), loss_spec, 0)

    @property
    def K(self) -> int:
        return self.log_weights.size


def mixture_weights(log_weights: np.ndarray) -> np.ndarray:
    """Normalized weights from log weights; uniform if every expert is eliminated."""
    top = np.max(log_weights)
    if not np.isfinite(top):
        return np.full(log_weights.size, 1.0 / log_weights.size)
    w = np.exp(log_weights - top)
    return w / w.sum()


def ewa_predict(state: EwaState, experts, x: int) -> Distribution:
    E = expert_tensor(experts)
    if E.shape[0] != state.K:
        raise ValueError(f"{E.shape[0]} experts but {state.K} weights")
    return Distribution(mixture_weights(state.log_weights) @ E[:, x, :])


def _shifted(lw: np.ndarray) -> np.ndarray:
    top = np.max(lw)
    return lw - top if np.isfinite(top) else lw


def ewa_update(state: EwaState, experts, x: int, obs: int) -> EwaState:
    E = expert_tensor(experts)
    if not 0 <= obs < E.shape[2]:
        raise IndexError(f"observation {obs} out of range for M={E.shape[2]}")
    losses = loss_table(state.loss_spec, E[:, x, :])[:, obs]
    lw = state.log_weights - state.loss_spec.alpha * losses
    lw[np.isnan(lw)] = -np.inf
    return replace(state, log_weights=_shifted(lw), round=state.round + 1)


def ewa_regret_audit(experts, loss_spec: LossSpec, stream: Sequence[tuple]) -> float:
    """Worst-case regret of EWA against each expert on a fixed stream.

    Returns ``max_k sum_t l(obs_t, p_hat_t) - sum_t l(obs_t, f_k(x_t))``; the bound
    ``log K / alpha`` holds for every stream.
    """
    stream = list(stream)
    if not stream:
        raise ValueError("stream is empty")
    E = expert_tensor(experts)
    K = E.shape[0]
    L = loss_table(loss_spec, E)
    lw = np.zeros(K)
    learner = 0.0
    experts_total = np.zeros(K)
    for x, obs in stream:
        phat = mixture_weights(lw) @ E[:, x]
        learner += loss_table(loss_spec, phat)[obs]
        experts_total += L[:, x, obs]
        lw = lw - loss_spec.alpha * L[:, x, obs]
        lw[np.isnan(lw)] = -np.inf
        lw = _shifted(lw)
    return float(learner - np.min(experts_total))


# ---------------------------------------------------------------------------
# decision rules


TIE = _fast.TIE


def _first_min(v) -> int:
    """Lowest index whose value is within ``TIE`` of the minimum."""
    v = np.asarray(v)
    return int(np.argmax(v <= v.min() + TIE))


def predict_argmax(phat) -> int:
    """Index of the largest entry; entries within ``1e-12`` of it tie and the lowest wins."""
    return _first_min(-as_probs(phat))


def predict_l2_reduction(state: EwaState, experts, q_pairs: np.ndarray, x: int) -> int:
    """``argmin_y ||q_y^x - p_hat||^2`` for binary labels; ties go to label 0.

    ``q_pairs[x]`` holds the two gap-minimizing points ``(q_0^x, q_1^x)``.
    """
    phat = np.asarray(ewa_predict(state, experts, x))
    return l2_rule(q_pairs[x], phat)


def l2_rule(pair: np.ndarray, phat: np.ndarray) -> int:
    d0 = phat - pair[0]
    d1 = phat - pair[1]
    return 0 if d0 @ d0 <= d1 @ d1 + TIE else 1


def predict_hellinger_nearest(phat, kernel: NoiseKernel, x: int) -> int:
    """``argmin_y H^2(q_y^x, p_hat)`` for a kernel with singleton sets; ties go low."""
    p = np.sqrt(as_probs(phat))
    h = []
    for y in range(kernel.N):
        s = kernel.kernel_set(x, y)
        if not isinstance(s, Singleton):
            raise ValueError("Hellinger-nearest rule needs a kernel with singleton sets")
        d = p - np.sqrt(s.vertices[0])
        h.append(float(d @ d))
    return _first_min(h)


# ---------------------------------------------------------------------------
# stateful predictors used by the game loop


class Predictor:
    """Online predictor: ``predict(x, t, u)`` then ``update(x, t, obs)`` each round.

    ``u`` is a uniform draw in [0, 1) supplied by the game so that all randomness
    comes from one generator. ``phat`` holds the last mixture, when there is one.
    """

    name = "predictor"
    phat: np.ndarray | None = None

    def predict(self, x: int, t: int, u: float) -> int:
        raise NotImplementedError

    def update(self, x: int, t: int, obs: int) -> None:
        raise NotImplementedError

    def expert_for(self, k: int, x: int) -> np.ndarray | None:
        return None

    def fresh(self, truth: int | None = None) -> "Predictor":
        """Copy sharing the precomputed tables, with the learning state reset."""
        new = copy.copy(self)
        new._reset(truth)
        return new

    def _reset(self, truth):
        self.phat = None

    def event_held(self) -> bool | None:
        return None


class _EwaPredictor(Predictor):
    def __init__(self, experts: np.ndarray, loss_spec: LossSpec):
        self.E = experts
        self.loss_spec = loss_spec
        self.L = loss_table(loss_spec, experts) * loss_spec.alpha
        self._reset(None)

    def _reset(self, truth):
        self.phat = None
        self.lw = np.zeros(self.E.shape[0])
        self.round = 0

    @property
    def state(self) -> EwaState:
        return EwaState(self.lw.copy(), self.loss_spec, self.round)

    def _mix(self, x):
        self.phat = mixture_weights(self.lw) @ self.E[:, x, :]
        return self.phat

    def update(self, x, t, obs):
        lw = self.lw - self.L[:, x, obs]
        lw[np.isnan(lw)] = -np.inf
        self.lw = _shifted(lw)
        self.round += 1

    def expert_for(self, k, x):
        return self.E[k, x]

    _rule = _fast.RULE_ARGMAX
    _Q = np.zeros((1, 1, 1))
    _n_labels = 1

    def run_batch(self, xs, obs, u, record=False):
        """Play a whole run in compiled code; returns predictions and (optionally) mixtures."""
        yhat, hist = _fast.ewa_run(self.E, self.L, np.asarray(xs, dtype=np.int64),
                                   np.asarray(obs, dtype=np.int64), self._rule, self._Q,
                                   self._n_labels, record)
        return yhat, (hist if record else None)


def _features(hclass, kernel):
    if kernel.F is not None and kernel.F < hclass.F:
        raise ValueError(f"kernel covers {kernel.F} features, class has {hclass.F}")
    if kernel.step_dependent:
        raise ValueError(f"{kernel.name} kernel is step dependent; use the pairwise meta-predictor")
    return range(hclass.F)


class L2Reduction(_EwaPredictor):
    """Brier-loss EWA over ``f_h(x) = q_{h(x)}^x`` followed by the nearest-pair rule."""

    name = "l2-reduction"

    def __init__(self, hclass, kernel: NoiseKernel):
        if hclass.N != 2 or kernel.N != 2:
            raise ValueError("l2-reduction is defined for binary labels only")
        pairs = []
        for x in _features(hclass, kernel):
            r = gap(kernel.kernel_set(x, 0), kernel.kernel_set(x, 1), DivergenceKind.L2SQ)
            if not r.converged:
                raise RuntimeError(f"L2 gap solver failed at feature {x}")
            pairs.append([np.asarray(r.argmin_pair[0]), np.asarray(r.argmin_pair[1])])
        self.q_pairs = np.array(pairs)
        self.gamma = min(float(np.sum((p[0] - p[1]) ** 2)) for p in self.q_pairs)
        F = np.arange(hclass.F)
        experts = self.q_pairs[F[None, :], hclass.labels]
        super().__init__(experts, LossSpec.brier())
        self._rule, self._Q, self._n_labels = _fast.RULE_L2, self.q_pairs, 2

    def predict(self, x, t, u):
        return l2_rule(self.q_pairs[x], self._mix(x))


class LoglossRR(_EwaPredictor):
    """Log-loss EWA over ``f_h(x) = (1 - eta) e_{h(x)} + eta u`` with the argmax rule."""

    name = "logloss-rr"

    def __init__(self, hclass, M: int, eta: float):
        if not 0.0 <= eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {eta}")
        if hclass.N > M:
            raise ValueError("argmax rule needs labels and observations on one alphabet")
        self.eta = float(eta)
        self.n_labels = hclass.N
        base = (1.0 - eta) * np.eye(M)[: hclass.N] + eta / M
        super().__init__(base[hclass.labels], LossSpec.log())
        self._rule, self._n_labels = _fast.RULE_ARGMAX, hclass.N

    @classmethod
    def for_kernel(cls, hclass, kernel: RandomizedResponse) -> "LoglossRR":
        return cls(hclass, kernel.M, kernel.eta)

    def predict(self, x, t, u):
        return predict_argmax(self._mix(x)[: self.n_labels])


class HellingerSingleton(_EwaPredictor):
    """Log-loss EWA over ``f_h(x) = q_{h(x)}^x`` for singleton kernels, then the H^2 rule."""

    name = "hellinger-singleton"

    def __init__(self, hclass, kernel: NoiseKernel):
        rows = []
        for x in _features(hclass, kernel):
            row = []
            for y in range(kernel.N):
                s = kernel.kernel_set(x, y)
                if not isinstance(s, Singleton):
                    raise ValueError("hellinger-singleton needs a kernel with singleton sets")
                row.append(s.vertices[0])
            rows.append(row)
        self.Q = np.array(rows)
        self.sqrtQ = np.sqrt(self.Q)
        F = np.arange(hclass.F)
        super().__init__(self.Q[F[None, :], hclass.labels], LossSpec.log())
        self._rule, self._Q, self._n_labels = _fast.RULE_HELLINGER, self.sqrtQ, kernel.N

    def predict(self, x, t, u):
        d = self.sqrtQ[x] - np.sqrt(self._mix(x))
        return _first_min(np.einsum("ym,ym->y", d, d))
