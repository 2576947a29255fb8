"""Deterministic property suites behind the ``verify`` command.

Each check returns a :class:`~robust_online.dist.CheckReport`; ``worst`` is the
worst observed slack (or error) so failures can be triaged from the printout.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from .dist import (CheckReport, DivergenceKind, LossKind, LossSpec, bregman_three_point_check,
                   check_exp_concavity, hellinger_sq, kl, l2_sq, loss_table, renyi, tv)
from .kernel import MassartBernoulli, Polytope, RandomizedResponse, gap, min_pairwise_gap, project_l2
from .pairwise import PairTester, budget, lecam_birge_step
from .predictors import ewa_regret_audit

SUITES = ("divergences", "geometry", "ewa", "testers")


def _pairs(rng, n, M_range=(2, 6), floor=0.0):
    for _ in range(n):
        M = int(rng.integers(*M_range))
        p, q = rng.dirichlet(np.ones(M)), rng.dirichlet(np.ones(M))
        if floor:
            p, q = (1 - M * floor) * p + floor, (1 - M * floor) * q + floor
        yield p, q


# ---------------------------------------------------------------------------
# divergences


def check_renyi_hellinger(trials=2000, seed=0, atol=1e-10) -> CheckReport:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, q in _pairs(rng, trials, floor=1e-3):
        h = hellinger_sq(p, q)
        worst = max(worst, abs(h - 2.0 * (1.0 - math.exp(-renyi(0.5, p, q) / 2.0))))
    return CheckReport("Renyi-1/2 / Hellinger identity", worst <= atol, worst, trials)


def product_distribution(p, n: int) -> np.ndarray:
    out = np.asarray(p, dtype=np.float64)
    for _ in range(n - 1):
        out = np.outer(out, p).ravel()
    return out


def check_tensorization(seed=0, atol=1e-10, reps=10) -> CheckReport:
    rng = np.random.default_rng(seed)
    worst, trials = 0.0, 0
    for M in range(2, 5):
        for n in range(1, 5):
            for _ in range(reps):
                p, q = rng.dirichlet(np.ones(M)), rng.dirichlet(np.ones(M))
                h = hellinger_sq(p, q)
                lhs = hellinger_sq(product_distribution(p, n), product_distribution(q, n))
                worst = max(worst, abs(lhs - (2.0 - 2.0 * (1.0 - h / 2.0) ** n)))
                trials += 1
    return CheckReport("Hellinger tensorization", worst <= atol, worst, trials)


def check_tv_hellinger(trials=10_000, seed=0, tol=1e-12) -> CheckReport:
    rng = np.random.default_rng(seed)
    worst = math.inf
    for p, q in _pairs(rng, trials):
        h = hellinger_sq(p, q)
        worst = min(worst, math.sqrt(max(h * (1.0 - h / 4.0), 0.0)) - tv(p, q))
    return CheckReport("TV <= sqrt(H2 (1 - H2/4))", worst >= -tol, worst, trials)


def check_kl_hellinger(trials=2000, seed=0) -> CheckReport:
    rng = np.random.default_rng(seed)
    worst = math.inf
    for p, q in _pairs(rng, trials, floor=1e-4):
        worst = min(worst, kl(p, q) - hellinger_sq(p, q), kl(q, p) - hellinger_sq(q, p))
    return CheckReport("KL >= H2 (both orders)", worst >= -1e-12, worst, trials)


def check_ranges_symmetry(trials=2000, seed=0) -> CheckReport:
    rng = np.random.default_rng(seed)
    worst = 0.0
    ok = True
    for p, q in _pairs(rng, trials):
        for f in (l2_sq, hellinger_sq, tv):
            worst = max(worst, abs(f(p, q) - f(q, p)))
        h = hellinger_sq(p, q)
        ok &= 0.0 <= h <= 2.0 and 0.0 <= tv(p, q) <= 1.0
    return CheckReport("symmetry of L2/H2/TV and ranges", ok and worst <= 1e-15, worst, trials)


def check_hellinger_l2_floor(trials=2000, seed=0) -> CheckReport:
    """``H2 >= L2 / 4``, which follows from ``|p - q| = |sqrt p - sqrt q| (sqrt p + sqrt q)``."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    for p, q in _pairs(rng, trials):
        worst = min(worst, hellinger_sq(p, q) - l2_sq(p, q) / 4.0)
    return CheckReport("H2 >= L2/4", worst >= -1e-15, worst, trials)


def probe_hellinger_4l2(grid=101) -> CheckReport:
    """Probe the comparison ``H2 >= 4 L2`` on a binary grid; reported, never failed."""
    ts = np.linspace(0.0, 1.0, grid)
    bad, worst = 0, math.inf
    for a, b in itertools.product(ts, ts):
        p, q = np.array([1 - a, a]), np.array([1 - b, b])
        s = hellinger_sq(p, q) - 4.0 * l2_sq(p, q)
        worst = min(worst, s)
        bad += s < -1e-12
    return CheckReport("probe H2 >= 4 L2 (informational)", True, worst, grid * grid,
                       f"counterexamples: {bad}/{grid * grid}")


def suite_divergences(seed=0) -> list:
    return [
        check_renyi_hellinger(seed=seed),
        check_tensorization(seed=seed),
        check_tv_hellinger(seed=seed),
        check_kl_hellinger(seed=seed),
        check_ranges_symmetry(seed=seed),
        check_hellinger_l2_floor(seed=seed),
        probe_hellinger_4l2(),
        bregman_three_point_check(DivergenceKind.L2SQ, 500, seed),
        bregman_three_point_check(DivergenceKind.KL, 500, seed),
        check_exp_concavity(LossSpec.log(), 1000, seed),
        check_exp_concavity(LossSpec.brier(), 1000, seed),
    ]


# ---------------------------------------------------------------------------
# geometry


def random_polytope(rng, M=None, n=None):
    M = M or int(rng.integers(2, 5))
    n = n or int(rng.integers(2, 6))
    return Polytope(rng.dirichlet(np.full(M, 0.7), size=n))


def check_pythagorean(instances=1000, probes=100, seed=0, slack=-1e-8) -> CheckReport:
    """For ``q* = proj(p)``: ``L2(q, p) - L2(q, q*) >= L2(p, q*)`` for every ``q`` in the set."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    done = 0
    while done < instances:
        s = random_polytope(rng)
        p = rng.dirichlet(np.ones(s.M))
        qs, d2 = project_l2(p, s)
        if d2 < 1e-12:
            continue
        qs = np.asarray(qs)
        Q = rng.dirichlet(np.ones(s.n_vertices), size=probes) @ s.vertices
        lhs = np.sum((Q - p) ** 2, axis=1) - np.sum((Q - qs) ** 2, axis=1)
        worst = min(worst, float(np.min(lhs - d2)))
        done += 1
    return CheckReport("projection Pythagorean inequality", worst >= slack, worst, instances)


def check_gap_symmetry(trials=60, seed=0) -> CheckReport:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        M = int(rng.integers(2, 4))
        a, b = random_polytope(rng, M), random_polytope(rng, M)
        for d in (DivergenceKind.L2SQ, DivergenceKind.TV):
            worst = max(worst, abs(gap(a, b, d).value - gap(b, a, d).value))
    return CheckReport("gap symmetry (L2, TV)", worst <= 1e-9, worst, trials)


def check_intersecting_gap(trials=40, seed=0) -> CheckReport:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        M = int(rng.integers(2, 4))
        shared = rng.dirichlet(np.ones(M))
        a = Polytope(np.vstack([rng.dirichlet(np.ones(M), size=2), shared]))
        b = Polytope(np.vstack([shared, rng.dirichlet(np.ones(M), size=2)]))
        for d in (DivergenceKind.L2SQ, DivergenceKind.TV, DivergenceKind.HELLINGER_SQ):
            worst = max(worst, gap(a, b, d).value)
    return CheckReport("gap of intersecting sets is 0", worst <= 1e-9, worst, trials)


def check_massart_closed_form() -> CheckReport:
    worst = 0.0
    etas = np.linspace(0.0, 0.45, 10)
    for eta in etas:
        v = min_pairwise_gap(MassartBernoulli(float(eta)), [0], DivergenceKind.L2SQ).value
        worst = max(worst, abs(v - 2.0 * (1.0 - 2.0 * eta) ** 2))
    return CheckReport("Massart L2 gap = 2(1-2 eta)^2", worst <= 1e-9, worst, etas.size)


def check_rr_monotone() -> CheckReport:
    worst = math.inf
    for M in (2, 3):
        for d in (DivergenceKind.L2SQ, DivergenceKind.HELLINGER_SQ):
            vals = [min_pairwise_gap(RandomizedResponse(e, M), [0], d).value for e in np.arange(0, 10, 2) / 10]
            worst = min(worst, float(np.min(-np.diff(vals))))
    return CheckReport("randomized-response gaps nonincreasing in eta", worst >= -1e-9, worst, 20)


def suite_geometry(seed=0) -> list:
    return [check_pythagorean(seed=seed), check_gap_symmetry(seed=seed), check_intersecting_gap(seed=seed),
            check_massart_closed_form(), check_rr_monotone()]


# ---------------------------------------------------------------------------
# exponential weights


def ewa_regret_batch(P: np.ndarray, obs: np.ndarray, spec: LossSpec) -> np.ndarray:
    """Regret of EWA on ``S`` independent streams at once.

    ``P[s, t, k]`` is expert ``k``'s distribution at round ``t`` of stream ``s``.
    """
    S, T, K, M = P.shape
    idx = np.broadcast_to(obs[:, :, None, None], (S, T, K, 1))
    p_obs = np.take_along_axis(P, idx, axis=3)[..., 0]
    with np.errstate(divide="ignore"):
        if spec.kind is LossKind.LOG:
            lk = -np.log(p_obs)
        else:
            lk = np.einsum("stkm,stkm->stk", P, P) - 2.0 * p_obs + 1.0
    lw = np.zeros((S, K))
    learner = np.zeros(S)
    rows = np.arange(S)
    for t in range(T):
        top = lw.max(axis=1, keepdims=True)
        w = np.exp(lw - top)
        w /= w.sum(axis=1, keepdims=True)
        phat = np.einsum("sk,skm->sm", w, P[:, t])
        learner += loss_table(spec, phat)[rows, obs[:, t]]
        lw = lw - spec.alpha * lk[:, t]
    return learner - lk.sum(axis=1).min(axis=1)


def check_ewa_regret(spec: LossSpec, K: int, streams=1000, T=50, seed=0) -> CheckReport:
    rng = np.random.default_rng(seed)
    M = 2 + K % 3
    # sharp experts and biased observations make the streams far from benign
    G = rng.standard_exponential(size=(streams, T, K, M)) ** 2
    P = G / G.sum(axis=3, keepdims=True)
    P = 0.999 * P + 0.001 / M
    bias = rng.dirichlet(np.ones(M), size=streams)
    obs = np.array([rng.choice(M, size=T, p=b) for b in bias])
    reg = ewa_regret_batch(P, obs, spec)
    bound = math.log(K) / spec.alpha
    slack = float(np.min(bound - reg))
    return CheckReport(f"EWA regret <= log K / alpha ({spec.kind.value}, K={K})", slack >= -1e-9, slack, streams)


def check_ewa_reference(seed=0) -> CheckReport:
    """The batched audit agrees with the per-stream audit."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for spec in (LossSpec.log(), LossSpec.brier()):
        P = rng.dirichlet(np.ones(3), size=(5, 20, 4))
        obs = rng.integers(3, size=(5, 20))
        batch = ewa_regret_batch(P, obs, spec)
        for s in range(5):
            E = np.transpose(P[s], (1, 0, 2))                # (K, T, M) with x = t
            ref = ewa_regret_audit(E, spec, [(t, int(obs[s, t])) for t in range(20)])
            worst = max(worst, abs(ref - batch[s]))
    return CheckReport("batched EWA audit matches reference", worst <= 1e-9, worst, 10)


def suite_ewa(seed=0) -> list:
    out = [check_ewa_reference(seed)]
    for spec in (LossSpec.log(), LossSpec.brier()):
        for K in (2, 8, 64):
            out.append(check_ewa_regret(spec, K, seed=seed + K))
    return out


# ---------------------------------------------------------------------------
# testers


def lecam_birge_error_rate(s0, s1, delta: float, runs: int, seed: int = 0, noise: str = "worst"):
    """Monte Carlo decision-error rate of the likelihood-ratio test between two kernel sets.

    The truth is drawn uniformly from the two sets; the adversary emits the
    least-favorable point of the true set (``"worst"``) or a fresh uniform mixture of
    its vertices each step (``"uniform"``). Returns ``(rate, n_star, bound)`` where
    ``bound`` is ``2 prod(1 - gamma/2) / 2``, the average of the two error probabilities.
    """
    r = gap(s0, s1, DivergenceKind.HELLINGER_SQ)
    gamma = r.value
    n = budget(np.full(10_000, gamma), delta)
    p, q = np.asarray(r.argmin_pair[0]), np.asarray(r.argmin_pair[1])
    with np.errstate(divide="ignore"):
        llr = np.log(p) - np.log(q)
    rng = np.random.default_rng(seed)
    truth = rng.integers(2, size=runs)
    sets = (s0, s1)
    M = p.size
    errs = 0
    for side in (0, 1):
        rows = np.flatnonzero(truth == side)
        if rows.size == 0:
            continue
        s = sets[side]
        if noise == "worst":
            law = p if side == 0 else q
            obs = rng.choice(M, size=(rows.size, n), p=law)
        else:
            W = rng.dirichlet(np.ones(s.n_vertices), size=(rows.size, n))
            law = W @ s.vertices
            cdf = np.cumsum(law, axis=2)
            u = rng.random((rows.size, n, 1))
            obs = np.minimum((cdf <= u).sum(axis=2), M - 1)
        with np.errstate(invalid="ignore"):
            stat = np.nan_to_num(llr[obs].sum(axis=1), nan=0.0)
        decided = np.where(stat >= 0, 0, 1)
        errs += int(np.sum(decided != side))
    return errs / runs, n, (1.0 - gamma / 2.0) ** n


def check_lecam_birge(runs=4000, seed=0) -> CheckReport:
    m = MassartBernoulli(0.25)
    rate, n, bound = lecam_birge_error_rate(m.kernel_set(0, 0), m.kernel_set(0, 1), 0.1, runs, seed)
    return CheckReport("Le Cam-Birge error rate <= delta (Massart, delta=0.1)", rate <= 0.1 + 0.01, rate, runs,
                       f"n*={n}, average-error bound {bound:.4f}")


def check_tester_scalar_path(seed=0) -> CheckReport:
    """The step-by-step tester reaches the same decision as the vectorized statistic."""
    m = MassartBernoulli(0.25)
    r = gap(m.kernel_set(0, 0), m.kernel_set(0, 1), DivergenceKind.HELLINGER_SQ)
    p, q = r.argmin_pair
    n = budget([r.value] * 100, 0.1)
    rng = np.random.default_rng(seed)
    mism = 0
    for _ in range(200):
        obs = rng.integers(2, size=n + 5)
        t = PairTester.lecam_birge(budget=n)
        history = []
        for o in obs:
            t = lecam_birge_step(t, p, q, int(o))
            history.append(t.decided)
        stat = float(np.sum(np.log(np.asarray(p)[obs[:n]]) - np.log(np.asarray(q)[obs[:n]])))
        mism += history[n - 1] != (1 if stat >= 0 else 2)
        mism += any(h is not None for h in history[: n - 1]) or len(set(history[n - 1:])) != 1
    return CheckReport("Le Cam-Birge decision frozen at budget", mism == 0, float(mism), 200)


def check_meta_soundness(runs=40, seed=0) -> CheckReport:
    """Survivor sets shrink monotonically and hold the truth whenever the audited event holds."""
    from .game import Experiment, Planner, build_lower_bound_instance

    h, k, a = build_lower_bound_instance(3, 0.3, 120)
    exp = Experiment(h, k, "pairwise-meta", a, 120)
    planner = Planner(exp)
    bad = 0
    rng = np.random.default_rng(seed)
    for _ in range(runs):
        truth = int(rng.integers(h.K))
        pred = planner.predictor(truth)
        prev = pred.survivors.copy()
        obs = rng.integers(2, size=120)
        xs = np.repeat(np.arange(3), 40)
        for t in range(120):
            pred.predict(int(xs[t]), t, float(rng.random()))
            pred.update(int(xs[t]), t, int(obs[t]))
            bad += bool(np.any(pred.survivors & ~prev))
            if pred.event_held():
                bad += not pred.survivors[truth]
            prev = pred.survivors.copy()
    return CheckReport("meta survivors monotone and sound", bad == 0, float(bad), runs)


def suite_testers(seed=0) -> list:
    return [check_lecam_birge(seed=seed), check_tester_scalar_path(seed), check_meta_soundness(seed=seed)]


SUITE_FUNCS: dict[str, Callable] = {
    "divergences": suite_divergences,
    "geometry": suite_geometry,
    "ewa": suite_ewa,
    "testers": suite_testers,
}


def run_suites(names, seed=0) -> list:
    out = []
    for n in names:
        out.extend(SUITE_FUNCS[n](seed))
    return out
