import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import nnls

from robust_online.dist import Distribution, DivergenceKind, hellinger_sq, l2_sq, tv
from robust_online.kernel import (ConvergenceError, CustomKernel, GapReport, MassartBernoulli, Polytope,
                                  RandomizedResponse, Segment, Singleton, SingletonKernel, Tsybakov, TVBall,
                                  UniformMixture, VertexIndex, Worst, gap, min_norm_point, min_pairwise_gap,
                                  project_l2, sample_from, tv_ball_vertices, worst_case_lambdas)

L2, H2, TV = DivergenceKind.L2SQ, DivergenceKind.HELLINGER_SQ, DivergenceKind.TV
RR_H2_GAP = 2 - math.sqrt(3)  # eta=0.5, M=2; confirmed by a 1e-4 grid over both segments


def bern(t):
    return Distribution.bernoulli(t)


def nnls_projection(p, V):
    """Independent projection onto conv(V): NNLS with a heavily weighted sum-to-one row.

    The penalty leaves ``sum(w)`` slightly off 1, so the weights are renormalized to
    keep the returned point inside the hull.
    """
    big = 1e4
    A = np.vstack([V.T, big * np.ones(len(V))])
    w, _ = nnls(A, np.concatenate([p, [big]]))
    return (w / w.sum()) @ V


def alternating_gap(A, B, iters=600):
    x = A[0].astype(float)
    for _ in range(iters):
        y = nnls_projection(x, B)
        x = nnls_projection(y, A)
    return float(np.sum((x - nnls_projection(x, B)) ** 2))


def seg_grid(a, b, n=4001):
    s = np.linspace(0, 1, n)[:, None]
    return (1 - s) * np.asarray(a) + s * np.asarray(b)


class TestKernelSets:
    def test_segment_needs_distinct_endpoints(self):
        with pytest.raises(ValueError):
            Segment([0.5, 0.5], [0.5, 0.5])

    def test_contains(self):
        s = Segment([1, 0], [0.5, 0.5])
        assert s.contains([0.75, 0.25])
        assert not s.contains([0.25, 0.75])

    def test_polytope_dimension_check(self):
        with pytest.raises(ValueError):
            Polytope([[0.5, 0.5], [1 / 3, 1 / 3, 1 / 3]])


class TestKernelZoo:
    def test_massart_sets(self):
        k = MassartBernoulli(0.25)
        s0 = k.kernel_set(3, 0)
        assert isinstance(s0, Segment)
        np.testing.assert_allclose(sorted(s0.vertices[:, 1]), [0.0, 0.25])
        np.testing.assert_allclose(sorted(k.kernel_set(0, 1).vertices[:, 1]), [0.75, 1.0])

    def test_noiseless_rr_is_singleton(self):
        s = RandomizedResponse(0.0, 3).kernel_set(0, 2)
        assert isinstance(s, Singleton)
        np.testing.assert_allclose(s.vertices[0], [0, 0, 1])

    def test_singleton_table_lookup(self):
        table = np.array([[[0.9, 0.1], [0.2, 0.8]], [[0.6, 0.4], [0.4, 0.6]]])
        k = SingletonKernel(table)
        np.testing.assert_allclose(k.kernel_set(1, 1).vertices[0], [0.4, 0.6])
        with pytest.raises(IndexError):
            k.kernel_set(2, 0)

    def test_custom_callable(self):
        k = CustomKernel(lambda x, y: Singleton(bern(0.1 + 0.8 * y)), N=2, M=2)
        np.testing.assert_allclose(k.kernel_set(5, 1).vertices[0], [0.1, 0.9])

    def test_tsybakov_is_step_dependent(self):
        k = Tsybakov.worst_case(64, 0.5)
        with pytest.raises(ValueError):
            k.kernel_set(0, 0)
        s = k.kernel_set(0, 1, 63)
        assert isinstance(s, Singleton)  # last lambda is 1
        assert k.condition_holds()

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
    def test_worst_case_condition_is_tight(self, alpha):
        k = Tsybakov.worst_case(256, alpha, 1.5)
        np.testing.assert_allclose(k.A, 1.5 * 2.0 ** (alpha / (1 - alpha)))
        assert k.condition_holds()
        assert not Tsybakov(k.lambdas, A=0.9 * k.A, alpha=alpha).condition_holds()

    def test_worst_case_lambdas_ascending(self):
        lam = worst_case_lambdas(100, 0.25)
        assert np.all(np.diff(lam) >= 0) and lam[-1] == 1.0 and lam[0] > 0

    def test_tv_ball_vertices(self):
        V = tv_ball_vertices([0.5, 0.3, 0.2], 0.1)
        for v in V:
            assert tv(v, [0.5, 0.3, 0.2]) == pytest.approx(0.1)
        # binary ball is a segment
        np.testing.assert_allclose(sorted(tv_ball_vertices([0.7, 0.3], 0.1)[:, 0]), [0.6, 0.8])

    def test_tv_ball_gap(self):
        k = TVBall([[0.9, 0.1], [0.1, 0.9]], 0.1)
        r = min_pairwise_gap(k, [0], TV)
        assert r.value == pytest.approx(0.6)


class TestGap:
    def test_massart_l2(self):
        r = min_pairwise_gap(MassartBernoulli(0.25), [0, 1, 2], L2)
        assert r.value == pytest.approx(0.5)
        np.testing.assert_allclose(r.argmin_pair[0], [0.75, 0.25])
        np.testing.assert_allclose(r.argmin_pair[1], [0.25, 0.75])

    @pytest.mark.parametrize("eta", [0.0, 0.1, 0.3, 0.45])
    def test_massart_closed_form(self, eta):
        assert min_pairwise_gap(MassartBernoulli(eta), [0], L2).value == pytest.approx(2 * (1 - 2 * eta) ** 2)

    def test_identical_singletons(self):
        assert gap(Singleton(bern(0.3)), Singleton(bern(0.3)), H2).value == 0.0

    def test_singleton_hellinger(self):
        r = gap(Singleton(bern(0.5)), Singleton(bern(0.9)), H2)
        np.testing.assert_allclose(r.value, 0.21114561800016823, rtol=1e-14)

    def test_rr_hellinger_gap(self):
        r = min_pairwise_gap(RandomizedResponse(0.5, 2), [0], H2)
        np.testing.assert_allclose(r.value, RR_H2_GAP, atol=1e-9)
        # brute-force check over both segments
        A, B = seg_grid([1, 0], [0.75, 0.25], 2001), seg_grid([0, 1], [0.25, 0.75], 2001)
        sa, sb = np.sqrt(A), np.sqrt(B)
        brute = min(float(((sa[i] - sb) ** 2).sum(1).min()) for i in range(len(A)))
        assert r.value <= brute + 1e-12
        assert brute - r.value < 1e-6

    def test_equal_rows_gap_zero(self):
        table = np.array([[[0.3, 0.7], [0.3, 0.7]]])
        assert min_pairwise_gap(SingletonKernel(table), [0], H2).value == 0.0

    def test_report_value_matches_pair(self):
        with pytest.raises(AssertionError):
            GapReport(L2, 0.7, (bern(0.25), bern(0.75)), 0, True)

    def test_witness(self):
        table = np.array([[[0.9, 0.1], [0.1, 0.9]], [[0.6, 0.4], [0.4, 0.6]]])
        r = min_pairwise_gap(SingletonKernel(table), [0, 1], H2)
        assert r.witness == (1, 0, 1)

    def test_rr_gap_decreases_with_eta(self):
        for d in (L2, H2):
            vals = [min_pairwise_gap(RandomizedResponse(e, 3), [0], d).value for e in (0.0, 0.2, 0.4, 0.6, 0.8)]
            assert np.all(np.diff(vals) <= 1e-9)

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_polytope_l2_gap_matches_alternating_projection(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.dirichlet(np.ones(3), size=3)
        B = rng.dirichlet(np.ones(3), size=4)
        r = gap(Polytope(A), Polytope(B), L2)
        alt = alternating_gap(A, B)  # a feasible pair, so an upper bound on the gap
        assert r.value <= alt + 1e-9
        assert alt - r.value < 1e-5
        assert r.value == pytest.approx(l2_sq(*r.argmin_pair), abs=1e-9)

    @given(st.integers(0, 10_000))
    @settings(max_examples=15, deadline=None)
    def test_polytope_hellinger_gap_upper_bounds(self, seed):
        # the solver value must not exceed any sampled pair, and sampling gets close
        rng = np.random.default_rng(seed)
        A = rng.dirichlet(np.ones(3), size=3)
        B = rng.dirichlet(np.ones(3), size=3)
        r = gap(Polytope(A), Polytope(B), H2)
        WA = rng.dirichlet(np.ones(3), size=3000) @ A
        WB = rng.dirichlet(np.ones(3), size=3000) @ B
        sampled = np.sum((np.sqrt(WA) - np.sqrt(WB)) ** 2, axis=1).min()
        assert r.value <= sampled + 1e-9
        assert r.value == pytest.approx(hellinger_sq(*r.argmin_pair), abs=1e-9)


    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_segment_hellinger_gap_matches_grid(self, seed):
        # covers both the corner shortcut and the nested scalar search
        rng = np.random.default_rng(seed)
        M = int(rng.integers(2, 5))
        A = rng.dirichlet(np.full(M, rng.choice([0.3, 1.0, 5.0])), size=2)
        B = rng.dirichlet(np.full(M, rng.choice([0.3, 1.0, 5.0])), size=2)
        r = gap(Segment(*A), Segment(*B), H2)
        g = np.linspace(0.0, 1.0, 401)[:, None]
        sa, sb = np.sqrt((1 - g) * A[0] + g * A[1]), np.sqrt((1 - g) * B[0] + g * B[1])
        grid = float(np.min(2.0 - 2.0 * sa @ sb.T))
        assert r.value <= grid + 1e-9
        assert grid - r.value < 1e-4


class TestProjection:
    def test_inside(self):
        s = Segment([1, 0], [0.5, 0.5])
        q, d2 = project_l2([0.75, 0.25], s)
        np.testing.assert_allclose(q, [0.75, 0.25])
        assert d2 == pytest.approx(0.0, abs=1e-15)

    def test_segment_example(self):
        q, d2 = project_l2([1, 0], Segment([0, 1], [0.5, 0.5]))
        np.testing.assert_allclose(q, [0.5, 0.5])
        assert d2 == pytest.approx(0.5)

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_matches_nnls_and_pythagorean(self, seed):
        rng = np.random.default_rng(seed)
        M = int(rng.integers(2, 5))
        V = rng.dirichlet(np.ones(M), size=int(rng.integers(2, 6)))
        p = rng.dirichlet(np.ones(M))
        q, d2 = project_l2(p, Polytope(V))
        q = np.asarray(q)
        ref = nnls_projection(p, V)
        assert d2 <= float(np.sum((p - ref) ** 2)) + 1e-9
        Q = rng.dirichlet(np.ones(len(V)), size=100) @ V
        lhs = np.sum((Q - p) ** 2, axis=1) - np.sum((Q - q) ** 2, axis=1)
        assert np.all(lhs - d2 >= -1e-8)

    def test_min_norm_point(self):
        x, w, it, ok = min_norm_point(np.array([[1.0, 1.0], [1.0, -1.0]]))
        assert ok
        np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-12)


class TestSampling:
    def test_singleton_any_strategy(self):
        s = Singleton(bern(0.3))
        for strat in (Worst(bern(1.0)), VertexIndex(0), UniformMixture()):
            np.testing.assert_allclose(sample_from(s, strat, np.random.default_rng(0)), [0.7, 0.3])

    def test_worst_massart_endpoint(self):
        s = MassartBernoulli(0.25).kernel_set(0, 0)
        np.testing.assert_allclose(sample_from(s, Worst(bern(1.0))), [0.75, 0.25])

    def test_uniform_mixture_reproducible(self):
        s = Segment([1, 0], [0.5, 0.5])
        a = sample_from(s, UniformMixture(), np.random.default_rng(7))
        b = sample_from(s, UniformMixture(), np.random.default_rng(7))
        np.testing.assert_allclose(a, b)
        assert s.contains(a)

    def test_convergence_error_type(self):
        assert issubclass(ConvergenceError, RuntimeError)
