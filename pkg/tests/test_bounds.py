import math
import warnings

import numpy as np
import pytest

from robust_pwm.bounds import (
    CONTAMINATION_FACTOR,
    VarianceProxies,
    adaptive_radius,
    bernoulli_tail,
    bound_report,
    estimate_variance_proxies,
    mom_radius,
    u_statistic_variance,
    variance_bound_general,
    variance_bound_split,
    xi_radius,
)
from robust_pwm.distributions import RandomStream, order_stat_oracle, uniform_order_stat_v1
from robust_pwm.estimators import KernelSpec
from robust_pwm.exceptions import NonIdentifiable

E = math.e


def proxies(v1, vm, m):
    return VarianceProxies.from_endpoints(m, vm, v1)


class TestVarianceBounds:
    def test_mean_of_iid(self):
        assert variance_bound_general(100, 1, 1, 1.0) == pytest.approx(0.01)

    def test_general_arithmetic(self):
        assert variance_bound_general(100, 3, 1, 2.0) == pytest.approx(0.06)
        assert variance_bound_general(100, 4, 2, 1.0) == pytest.approx(0.0048)

    def test_split_arithmetic(self):
        assert variance_bound_split(1000, 2, 1, 0.1, 1.0) == pytest.approx(4.04e-4, rel=1e-12)

    @pytest.mark.parametrize("n,m,v1,vm", [(50, 3, 0.01, 0.05), (200, 4, 0.2, 1.0)])
    def test_split_q1_form(self, n, m, v1, vm):
        expected = m**2 * v1 / n + (m - 1) * m**2 * vm / n**2
        assert variance_bound_split(n, m, 1, v1, vm) == pytest.approx(expected, rel=1e-14)

    def test_split_first_term_dominates(self):
        m, vm = 4, 1.0
        v1 = vm / m
        for n in (10**3, 10**5, 10**7):
            first = m * m * v1 / n
            assert variance_bound_split(n, m, 1, v1, vm) == pytest.approx(first, rel=5 * m / n)

    def test_orders_validated(self):
        with pytest.raises(ValueError):
            variance_bound_general(10, 3, 4, 1.0)
        with pytest.raises(ValueError):
            variance_bound_general(2, 3, 1, 1.0)

    def test_bounds_dominate_exact_variance(self):
        # uniform max of 2: v_1 = 1/45, v_2 = var(Beta(2,1)) = 1/18
        v = (1 / 45, 1 / 18)
        for n in (2, 5, 20, 100):
            exact = u_statistic_variance(n, 2, v)
            assert exact <= variance_bound_general(n, 2, 1, v[1])
            assert exact <= variance_bound_split(n, 2, 1, v[0], v[1])


class TestMomRadius:
    def test_hand_value(self):
        r = mom_radius(100, 1, 1, math.exp(-1), VarianceProxies((1.0,)))
        assert r == pytest.approx(2 * E * math.sqrt(2 / 100), abs=1e-15)
        assert r == pytest.approx(0.7689, abs=1e-4)

    def test_contamination_ratio(self):
        assert CONTAMINATION_FACTOR == pytest.approx(8 * E / (3 * math.sqrt(3)), rel=1e-15)
        assert CONTAMINATION_FACTOR == pytest.approx(4.18507, abs=1e-5)
        for flavor in ("sub_gaussian", "sub_gamma"):
            p = proxies(0.01, 0.05, 3)
            clean = mom_radius(300, 3, 1, 0.05, p, "clean", flavor)
            dirty = mom_radius(300, 3, 1, 0.05, p, "contaminated", flavor)
            assert dirty / clean == pytest.approx(CONTAMINATION_FACTOR, rel=1e-14)

    def test_unit_arity_sub_gamma(self):
        n, K, v = 100, 3, 0.7
        p = VarianceProxies((v,))
        g = mom_radius(n, 1, 1, math.exp(-K), p, flavor="sub_gaussian")
        s = mom_radius(n, 1, 1, math.exp(-K), p, flavor="sub_gamma")
        assert s**2 - g**2 == pytest.approx((2 * E) ** 2 * 4 * v * K**2 / n**2, rel=1e-12)

    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_q1_specialisations(self, m):
        n, delta, v1, vm = 500, 0.01, 0.02, 0.09
        if m == 1:
            v1 = vm
        K = math.ceil(math.log(1 / delta))
        p = proxies(v1, vm, m)
        assert mom_radius(n, m, 1, delta, p) == pytest.approx(
            2 * E * math.sqrt(2 * m * vm * K / n), rel=1e-15)
        assert mom_radius(n, m, 1, delta, p, flavor="sub_gamma") == pytest.approx(
            2 * E * math.sqrt(2 * m**2 * v1 * K / n + 4 * m**3 * vm * K**2 / n**2), rel=1e-15)

    def test_degenerate_kernel(self):
        n, m, q, K = 400, 3, 2, 2
        p = VarianceProxies((0.0, 0.3, 1.0))
        t1 = mom_radius(n, m, q, math.exp(-K), p)
        assert t1 == pytest.approx(2 * E * math.sqrt(math.comb(2, 1) * (2 * m) ** 2 * 1.0 * K**2 / n**2))
        t2 = mom_radius(n, m, q, math.exp(-K), p, flavor="sub_gamma")
        expected = 2 * E * math.sqrt(3 * (2 * m) ** 2 * 0.3 * K**2 / n**2 + 1 * (2 * m) ** 3 * K**3 / n**3)
        assert t2 == pytest.approx(expected)

    def test_monotonicity(self):
        p = proxies(0.01, 0.05, 3)
        rs = [mom_radius(n, 3, 1, 0.05, p) for n in (30, 60, 300, 3000)]
        assert all(a >= b for a, b in zip(rs, rs[1:]))
        rs = [mom_radius(300, 3, 1, d, p) for d in (0.9, 0.3, 0.05, 1e-4, 1e-20)]
        assert all(a <= b for a, b in zip(rs, rs[1:]))
        assert mom_radius(300, 3, 1, 0.05, proxies(0.01, 0.06, 3)) > mom_radius(300, 3, 1, 0.05, p)
        assert (mom_radius(300, 3, 1, 0.05, proxies(0.02, 0.05, 3), flavor="sub_gamma")
                > mom_radius(300, 3, 1, 0.05, p, flavor="sub_gamma"))

    def test_sub_gamma_variance_term_smaller(self):
        # m v_1 <= v_m implies 2 m^2 v_1 <= 2 m v_m
        for k, m in [(1, 2), (2, 3), (3, 4), (4, 4)]:
            _, vm = order_stat_oracle("uniform01", k, m)
            v1 = uniform_order_stat_v1(k, m)
            assert m * v1 <= vm
            assert 2 * m**2 * v1 <= 2 * m * vm

    def test_delta_range(self):
        with pytest.raises(ValueError):
            mom_radius(10, 3, 1, math.exp(-4), proxies(0.01, 0.05, 3))
        with pytest.raises(ValueError):
            mom_radius(10, 3, 1, 1.0, proxies(0.01, 0.05, 3))

    def test_sub_gamma_needs_v_q(self):
        with pytest.raises(ValueError):
            mom_radius(100, 3, 1, 0.1, VarianceProxies.from_endpoints(3, 0.05), flavor="sub_gamma")
        rep = bound_report(100, 3, 1, 0.1, VarianceProxies.from_endpoints(3, 0.05))
        assert rep.t2 is None and rep.t1 > 0

    def test_large_block_count_finite(self):
        r = mom_radius(10**7, 1, 1, 1e-300, VarianceProxies((1.0,)), flavor="sub_gamma")
        assert math.isfinite(r)

    def test_adaptive_radius(self):
        r = adaptive_radius(1000, 2, 1.0, 0.05)
        slack = 1 + math.log(1 / (1 - math.exp(-1))) + math.log(20)
        assert r == pytest.approx(4 * E * math.sqrt(4 * slack / 1000))
        with pytest.raises(ValueError):
            adaptive_radius(4, 2, 1.0, 0.1)


class TestXiRadius:
    def test_zero_shape_factor(self):
        # (2^0 + 1)(2^0 + 2^0) = 4
        n, delta, v, d = 400, math.exp(-2), 1.3, 0.9
        r, conf = xi_radius(n, delta, v, 0.0, 1.0 + d, 1.0, xi=0.0)
        assert r == pytest.approx(2 * E * 4 / (math.log(2) * d) * math.sqrt(8 * v * 2 / n), rel=1e-14)
        assert conf == pytest.approx(1 - 3 * delta)

    def test_scaling_in_n(self):
        a, _ = xi_radius(400, 0.05, 1.0, 0.2, 2.0, 1.0, xi=0.3)
        b, _ = xi_radius(800, 0.05, 1.0, 0.2, 2.0, 1.0, xi=0.3)
        assert a / b == pytest.approx(math.sqrt(2), rel=1e-14)

    def test_regime_ratio(self):
        a, _ = xi_radius(400, 0.05, 1.0, 0.2, 2.0, 1.0)
        b, _ = xi_radius(400, 0.05, 1.0, 0.2, 2.0, 1.0, regime="contaminated")
        assert b / a == pytest.approx(CONTAMINATION_FACTOR, rel=1e-14)

    def test_plug_in_vs_oracle(self):
        plug, _ = xi_radius(400, 0.05, 1.0, 0.2, 2.0, 1.0)
        oracle, _ = xi_radius(400, 0.05, 1.0, 0.2, 2.0, 1.0, xi=0.2)
        assert plug == oracle

    def test_non_identifiable(self):
        with pytest.raises(NonIdentifiable):
            xi_radius(400, 0.05, 1.0, 0.2, 1.0, 1.0)


class TestBernoulliTail:
    def test_hand_value(self):
        assert bernoulli_tail(1, 0.5, 0.25) == pytest.approx(math.sqrt(0.75), abs=1e-15)

    @pytest.mark.parametrize("K", [1, 2, 5, 50, 1000])
    def test_median_step(self, K):
        p = math.exp(-2) / 4
        b = bernoulli_tail(K, 0.5, p)
        assert b <= math.exp(-K) * (1 + 1e-12)
        assert b <= (2 * math.sqrt(p)) ** K * (1 + 1e-12)

    @pytest.mark.parametrize("K", [1, 2, 5, 50, 1000])
    def test_quarter_step(self, K):
        p = 3**3 * 2.0**-8 * math.exp(-4)
        assert bernoulli_tail(K, 0.25, p) <= math.exp(-K) * (1 + 1e-12)

    def test_against_exact_binomial(self):
        from scipy import stats

        for K in (4, 10, 40):
            for p in (0.01, 0.1):
                exact = stats.binom.sf(math.ceil(K / 2) - 1, K, p)
                assert exact <= bernoulli_tail(K, 0.5, p)

    def test_log_space(self):
        assert math.isfinite(bernoulli_tail(10**6, 0.5, 1e-300))
        assert bernoulli_tail(10**6, 0.5, 1e-300) >= 0

    @pytest.mark.parametrize("a,p", [(0, 0.1), (1, 0.1), (0.5, 0), (0.5, 1)])
    def test_rejects_boundaries(self, a, p):
        with pytest.raises(ValueError):
            bernoulli_tail(3, a, p)


class TestVarianceProxyEstimation:
    def test_identity_kernel(self):
        k = KernelSpec.general(lambda X: X[..., 0], 1, vectorized=True)
        est = estimate_variance_proxies(lambda r, s: r.random(s), k, 100_000, 2, RandomStream(1))
        assert est.v[0] == pytest.approx(1 / 12, abs=4 * est.stderr[0])

    def test_median_of_three(self):
        est = estimate_variance_proxies(lambda r, s: r.random(s), KernelSpec.order_statistic(2, 3),
                                        50_000, 30, RandomStream(2))
        assert abs(est.v_m - 1 / 20) < 4 * est.stderr[-1]
        assert abs(est.v[0] - uniform_order_stat_v1(2, 3)) < 4 * est.stderr[0] + 1e-4

    @pytest.mark.parametrize("k,m", [(1, 2), (2, 3), (4, 4)])
    def test_hoeffding_ordering(self, k, m):
        est = estimate_variance_proxies(lambda r, s: r.exponential(size=s), KernelSpec.order_statistic(k, m),
                                        30_000, 30, RandomStream(3, k + m))
        se = est.stderr
        for a in range(m):
            for b in range(a, m):
                lhs, rhs = est.v[a] / (a + 1), est.v[b] / (b + 1)
                assert lhs <= rhs + 4 * (se[a] / (a + 1) + se[b] / (b + 1))
        assert est.v[0] <= est.v_m + 4 * (se[0] + se[-1])

    def test_degenerate_kernel_clamped(self):
        # (x - y)^2 / 2 - 1 on standard normals: E[. | X_1] = x^2/2 - 1/2, v_1 > 0;
        # x * y is 2-degenerate: v_1 = 0
        k = KernelSpec.general(lambda X: X[..., 0] * X[..., 1], 2, q=2, vectorized=True)
        with warnings.catch_warnings(record=True):
            warnings.simplefilter("always")
            est = estimate_variance_proxies(lambda r, s: r.standard_normal(s), k, 5000, 5, RandomStream(4))
        assert est.v[0] >= 0
        assert est.v[0] < 0.02
        assert est.v_m == pytest.approx(1.0, abs=0.1)

    def test_rejects_small_reps(self):
        with pytest.raises(ValueError):
            estimate_variance_proxies(lambda r, s: r.random(s), KernelSpec.order_statistic(1, 2), 1, 5,
                                      RandomStream(0))

    def test_proxies_container(self):
        p = VarianceProxies((0.01, 0.02, 0.05))
        assert p.hoeffding_ordered()
        assert not VarianceProxies((0.04, 0.05)).hoeffding_ordered()
        with pytest.raises(ValueError):
            VarianceProxies((-1.0,))
        with pytest.raises(ValueError):
            VarianceProxies.from_endpoints(3, 0.05).at(1)
