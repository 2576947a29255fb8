import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from robust_online.dist import (DimensionError, Distribution, DivergenceKind, LossKind, LossSpec, Renyi,
                                bregman_three_point_check, check_exp_concavity, hellinger_sq, kl, l2_sq,
                                loss, loss_table, renyi, tv)

# independent oracle values, computed once by direct evaluation and frozen here
H2_BERN_05_09 = 0.21114561800016823
D_HALF_BERN_05_09 = 0.22314355131420982


def bern(t):
    return Distribution.bernoulli(t)


@st.composite
def dist_pairs(draw, min_M=2, max_M=5, floor=0.0):
    M = draw(st.integers(min_M, max_M))
    raw = arrays(np.float64, M, elements=st.floats(1e-3, 1.0))
    p, q = draw(raw), draw(raw)
    p, q = p / p.sum(), q / q.sum()
    if floor:
        p, q = (1 - M * floor) * p + floor, (1 - M * floor) * q + floor
    return p, q


class TestDistribution:
    def test_normalizes_small_drift(self):
        d = Distribution([0.5, 0.5 + 1e-10])
        assert abs(float(np.sum(d)) - 1.0) < 1e-12

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            Distribution([0.5, 0.6])
        with pytest.raises(ValueError):
            Distribution([-0.1, 1.1])
        with pytest.raises(ValueError):
            Distribution([1.0])

    def test_read_only(self):
        d = Distribution([0.2, 0.8])
        with pytest.raises(ValueError):
            np.asarray(d)[0] = 1.0

    def test_constructors(self):
        np.testing.assert_allclose(Distribution.point_mass(1, 3), [0, 1, 0])
        np.testing.assert_allclose(Distribution.uniform(4), [0.25] * 4)
        np.testing.assert_allclose(bern(0.3), [0.7, 0.3])
        np.testing.assert_allclose(Distribution.mixture([0.5, 0.5], [[1, 0], [0, 1]]), [0.5, 0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            l2_sq([0.5, 0.5], [1 / 3] * 3)


class TestDivergenceValues:
    def test_disjoint_point_masses(self):
        p, q = [1.0, 0.0], [0.0, 1.0]
        assert l2_sq(p, q) == pytest.approx(2.0)
        assert hellinger_sq(p, q) == pytest.approx(2.0)
        assert tv(p, q) == pytest.approx(1.0)
        assert kl(p, q) == math.inf
        assert renyi(0.5, p, q) == math.inf

    def test_identity(self):
        p = [0.2, 0.3, 0.5]
        for f in (l2_sq, hellinger_sq, tv, kl):
            assert f(p, p) == pytest.approx(0.0, abs=1e-15)
        assert renyi(0.5, p, p) == pytest.approx(0.0, abs=1e-15)

    def test_known_values(self):
        assert l2_sq(bern(0.25), bern(0.75)) == pytest.approx(0.5)
        assert tv(bern(0.2), bern(0.6)) == pytest.approx(0.4)
        assert kl([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2))

    def test_hellinger_oracle(self):
        np.testing.assert_allclose(hellinger_sq(bern(0.5), bern(0.9)), H2_BERN_05_09, rtol=1e-14)
        np.testing.assert_allclose(renyi(0.5, bern(0.5), bern(0.9)), D_HALF_BERN_05_09, rtol=1e-12)
        # the pinned pair satisfies the Renyi/Hellinger identity exactly
        np.testing.assert_allclose(-2 * math.log(1 - H2_BERN_05_09 / 2), D_HALF_BERN_05_09, rtol=1e-12)

    def test_renyi_tends_to_kl(self):
        p, q = [0.3, 0.7], [0.6, 0.4]
        np.testing.assert_allclose(renyi(1 + 1e-7, p, q), kl(p, q), rtol=1e-5)
        with pytest.raises(ValueError):
            renyi(1.0, p, q)
        assert Renyi(0.5)(p, q) == pytest.approx(renyi(0.5, p, q))

    def test_kind_dispatch(self):
        assert DivergenceKind.parse("tv") is DivergenceKind.TV
        assert DivergenceKind.HELLINGER_SQ(bern(0.5), bern(0.9)) == pytest.approx(H2_BERN_05_09)
        assert DivergenceKind.L2SQ.symmetric and not DivergenceKind.KL.symmetric


class TestDivergenceProperties:
    @given(dist_pairs())
    def test_ranges_and_symmetry(self, pq):
        p, q = pq
        h = hellinger_sq(p, q)
        assert 0.0 <= h <= 2.0
        assert 0.0 <= tv(p, q) <= 1.0
        assert h == pytest.approx(hellinger_sq(q, p), abs=1e-15)
        assert l2_sq(p, q) == pytest.approx(l2_sq(q, p), abs=1e-15)

    @given(dist_pairs())
    def test_renyi_hellinger_identity(self, pq):
        p, q = pq
        h = hellinger_sq(p, q)
        np.testing.assert_allclose(h, 2 * (1 - math.exp(-renyi(0.5, p, q) / 2)), atol=1e-10)

    @given(dist_pairs(max_M=3), st.integers(1, 4))
    @settings(max_examples=50)
    def test_tensorization(self, pq, n):
        p, q = pq
        pn, qn = p, q
        for _ in range(n - 1):
            pn, qn = np.outer(pn, p).ravel(), np.outer(qn, q).ravel()
        h = hellinger_sq(p, q)
        np.testing.assert_allclose(hellinger_sq(pn, qn), 2 - 2 * (1 - h / 2) ** n, atol=1e-10)

    @given(dist_pairs())
    def test_tv_hellinger_inequality(self, pq):
        p, q = pq
        h = hellinger_sq(p, q)
        assert tv(p, q) <= math.sqrt(h * (1 - h / 4)) + 1e-12

    @given(dist_pairs())
    def test_hellinger_dominates_quarter_l2(self, pq):
        p, q = pq
        assert hellinger_sq(p, q) >= l2_sq(p, q) / 4 - 1e-15

    def test_four_l2_comparison_fails_in_general(self):
        # H2 >= 4 L2 is not a valid comparison: it fails for nearby Bernoullis
        p, q = bern(0.5), bern(0.6)
        assert hellinger_sq(p, q) < 4 * l2_sq(p, q)

    @given(dist_pairs(floor=1e-3))
    def test_kl_dominates_hellinger(self, pq):
        p, q = pq
        assert kl(p, q) >= hellinger_sq(p, q) - 1e-12


class TestLoss:
    def test_alpha_matches_kind(self):
        assert LossSpec.log().alpha == 1.0
        assert LossSpec.brier().alpha == 0.25
        with pytest.raises(ValueError):
            LossSpec(LossKind.LOG, alpha=2.0)

    def test_values(self):
        assert loss(LossSpec.log(), 0, [1, 0]) == 0.0
        assert loss(LossSpec.brier(), 0, [0.5, 0.5]) == pytest.approx(0.5)
        assert loss(LossSpec.log(), 1, [0.5, 0.5]) == pytest.approx(math.log(2))
        assert loss(LossSpec.log(), 1, [1, 0]) == math.inf

    def test_table_matches_scalar(self):
        P = np.array([[0.2, 0.3, 0.5], [0.6, 0.4, 0.0]])
        for spec in (LossSpec.log(), LossSpec.brier()):
            T = loss_table(spec, P)
            for i in range(2):
                for m in range(3):
                    np.testing.assert_allclose(T[i, m], loss(spec, m, P[i]))

    def test_exp_concavity(self):
        assert check_exp_concavity(LossSpec.log(), 1000, 0).passed
        assert check_exp_concavity(LossSpec.brier(), 1000, 0).passed

    def test_brier_with_alpha_one_is_not_exp_concave(self):
        r = check_exp_concavity(LossSpec.brier(), 1000, 0, alpha=1.0, M=2)
        assert not r.passed
        assert r.worst < 0


class TestThreePoint:
    def test_l2(self):
        r = bregman_three_point_check(DivergenceKind.L2SQ, 500, 0)
        assert r.passed and r.worst <= 1e-10

    def test_kl(self):
        r = bregman_three_point_check(DivergenceKind.KL, 500, 0)
        assert r.passed and r.worst <= 1e-10
