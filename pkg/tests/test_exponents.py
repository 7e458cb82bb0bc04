import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edswave.exponents import (
    CRITICAL_TOL, ExponentQuery, candidate_power, glassey, lifespan_bound,
    lifespan_exponent, p_eds, p_tricomi, q0, q1, tsutaya_bound, weight_exponent,
)
from edswave.special_functions import DomainError

Q = ExponentQuery


def bisect_root(f, lo, hi, n=200):
    # sign-change oracle, independent of the quadratic formula
    flo = f(lo)
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0) == (flo > 0):
            lo, flo = mid, f(mid)
        else:
            hi = mid
    return 0.5 * (lo + hi)


def q0_poly(N, k):
    return lambda x: ((1 - k) * N - 1) * x * x - ((1 - k) * N + 1 + 2 * k) * x - 2 * (1 - k)


class TestFormulas:
    @pytest.mark.parametrize("N,want", [(2, 3.0), (3, 2.0), (5, 1.5)])
    def test_glassey(self, N, want):
        assert glassey(N) == want

    def test_glassey_one_dimension_is_unbounded(self):
        assert glassey(1) == math.inf

    def test_glassey_rejects_zero(self):
        with pytest.raises(DomainError):
            glassey(0)

    @pytest.mark.parametrize("N,k,want", [(2, 0.0, 3.0), (3, 0.5, 7 / 3), (1, 0.5, 5.0)])
    def test_tricomi(self, N, k, want):
        assert p_tricomi(Q(N, k)) == pytest.approx(want, rel=1e-15)

    def test_tricomi_degenerate(self):
        assert p_tricomi(Q(1, 0.0)) == math.inf

    @pytest.mark.parametrize("N,k,mu,want", [(1, 0.5, 0.5, 3.0), (3, 0.0, 2.0, 1.5), (1, 0.0, 1.0, 3.0)])
    def test_eds(self, N, k, mu, want):
        assert p_eds(Q(N, k, mu)) == pytest.approx(want, rel=1e-15)

    def test_eds_degenerate(self):
        assert p_eds(Q(1, 0.0, 0.0)) == math.inf

    @pytest.mark.parametrize("N,k,want", [(2, 0.0, 2.0), (1, 0.5, 5.0), (4, 0.5, 2.0)])
    def test_q1(self, N, k, want):
        assert q1(Q(N, k)) == pytest.approx(want, rel=1e-15)

    def test_q0_examples(self):
        assert q0(Q(3, 0.0)) == pytest.approx(1 + math.sqrt(2), rel=1e-14)
        assert q0(Q(2, 0.0)) == pytest.approx((3 + math.sqrt(17)) / 2, rel=1e-14)
        assert q0(Q(3, 0.0)) == pytest.approx(bisect_root(q0_poly(3, 0.0), 0.0, 10.0), rel=1e-12)

    def test_q0_linear_case(self):
        # (1 - k) N = 1 leaves -(2 + 2k) x - 2(1 - k) = 0, whose root is negative
        with pytest.raises(DomainError, match="linear"):
            q0(Q(2, 0.5))
        x = q0(Q(2.0001, 0.5))
        assert abs(q0_poly(2.0001, 0.5)(x)) < 1e-10

    def test_q0_low_dimension_has_no_positive_root(self):
        with pytest.raises(DomainError, match="roots"):
            q0(Q(1, 0.5))

    @given(N=st.floats(1.5, 12.0), k=st.floats(0.0, 0.6))
    @settings(max_examples=100, deadline=None)
    def test_q0_root_and_largest(self, N, k):
        if (1 - k) * N - 1 <= 1e-3:
            return
        x = q0(Q(N, k))
        f = q0_poly(N, k)
        assert abs(f(x)) < 1e-10 * max(1.0, x * x * ((1 - k) * N))
        # leading coefficient positive and f(0) < 0: exactly one positive root
        assert f(x * (1 + 1e-6)) > 0 > f(0.0)

    @pytest.mark.parametrize("n,k,mu,want", [(1, 0.7, 0.05, 1 + 1 / 0.35), (2, 0.8, 0.1, 3.0)])
    def test_tsutaya_inside_window(self, n, k, mu, want):
        assert tsutaya_bound(n, Q(1, k, mu)) == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("n,k,mu", [(1, 0.5, 0.0), (1, 0.7, 0.2), (2, 0.74, 0.0)])
    def test_tsutaya_outside_window(self, n, k, mu):
        assert tsutaya_bound(n, Q(1, k, mu)) is None

    def test_candidate_power_is_max(self):
        q = Q(3, 0.2, 0.4)
        assert candidate_power(q) == max(q0(Q(3 + 0.4 / 0.8, 0.2)), q1(q))

    @pytest.mark.parametrize("bad", [dict(N=0.5), dict(N=2, k=1.0), dict(N=2, k=-0.1), dict(N=2, mu=-1)])
    def test_query_validation(self, bad):
        with pytest.raises(DomainError):
            Q(**bad)


def random_queries(n=100, seed=7):
    rng = np.random.default_rng(seed)
    return [Q(int(rng.integers(1, 11)), float(rng.uniform(0, 0.95)), float(rng.uniform(0, 5)))
            for _ in range(n)]


class TestRelations:
    @pytest.mark.parametrize("N", range(1, 11))
    @pytest.mark.parametrize("k", [0.0, 0.25, 0.5, 0.9])
    def test_consistency_chain(self, N, k):
        assert p_eds(Q(N, 0.0, 0.0)) == glassey(N)
        assert p_eds(Q(N, k, 0.0)) == p_tricomi(Q(N, k))

    def test_shift_identity(self):
        for q in random_queries():
            shifted = Q(q.N + q.mu / (1 - q.k), q.k, 0.0)
            assert abs(p_eds(q) - p_eds(shifted)) <= 1e-14 * p_eds(q)

    def test_kato_bridge(self):
        rng = np.random.default_rng(3)
        for q in random_queries():
            p = 1 + (p_eds(q) - 1) * float(rng.uniform(0.05, 0.95)) if math.isfinite(p_eds(q)) \
                else 1 + float(rng.uniform(0.1, 3))
            a = weight_exponent(q, p)
            assert abs(-(p - 1) / (1 - a) - lifespan_exponent(q, p)) < 1e-12 * abs(lifespan_exponent(q, p))

    def test_eds_decreasing(self):
        for q in random_queries(50, seed=11):
            assert p_eds(Q(q.N, q.k, q.mu + 0.5)) < p_eds(q)
            assert p_eds(Q(q.N + 1, q.k, q.mu)) < p_eds(q)


class TestLifespanBound:
    def test_subcritical_example(self):
        b = lifespan_bound(Q(1, 0.0, 1.0), 2.0, 0.1)
        assert (b.regime, b.form) == ("subcritical", "power")
        assert b.exponent == pytest.approx(-2.0, rel=1e-15)

    def test_subcritical_examples_exact(self):
        assert lifespan_bound(Q(1, 0.0, 1.0), 1.8).exponent == pytest.approx(-4 / 3, rel=1e-14)
        assert lifespan_bound(Q(1, 0.0, 1.0), 1.5).exponent == pytest.approx(-2 / 3, rel=1e-14)
        assert lifespan_bound(Q(1, 0.5, 0.5), 2.0).exponent == pytest.approx(-2.0, rel=1e-14)

    def test_critical(self):
        b = lifespan_bound(Q(1, 0.5, 0.5), 3.0, 0.1)
        assert (b.regime, b.form, b.exponent) == ("critical", "exponential", None)
        assert b.rate == -2.0
        assert lifespan_bound(Q(1, 0.5, 0.5), 3.0 + 0.5 * CRITICAL_TOL).regime == "critical"

    def test_supercritical(self):
        b = lifespan_bound(Q(1, 0.5, 0.5), 3.5)
        assert (b.regime, b.form, b.exponent) == ("supercritical", "none", None)

    def test_rejects_p_at_most_one(self):
        with pytest.raises(DomainError):
            lifespan_bound(Q(1, 0.0, 1.0), 1.0)

    def test_exponent_diverges_at_critical_power(self):
        q = Q(2, 0.3, 0.7)
        pc = p_eds(q)
        e = [lifespan_bound(q, pc - d).exponent for d in (1e-1, 1e-3, 1e-6)]
        assert e[0] > e[1] > e[2] and e[2] < -1e5

    def test_fraction_oracle(self):
        # exact rational arithmetic as an independent evaluation
        N, k, mu, p = 3, Fraction(1, 4), Fraction(1, 2), Fraction(5, 4)
        d = (1 - k) * (N - 1) + k + mu
        want = -2 * (p - 1) / (2 - d * (p - 1))
        got = lifespan_exponent(Q(N, float(k), float(mu)), float(p))
        assert got == pytest.approx(float(want), rel=1e-14)
