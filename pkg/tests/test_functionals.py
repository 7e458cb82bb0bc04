import math

import numpy as np
import pytest
from scipy import integrate, special

from edswave.functionals import (
    SLACK, BoundReport, check_U_lower, check_V_lower, compute_Cfg, compute_U,
    compute_V, cone_integral_psi, uv_relation_residual, u_balance_residual, find_T0, kappa,
    lower_bound_constants, psi_norm_bound,
)
from edswave.model import Grid, ModelParams
from edswave.solver import StoppingPolicy, run
from edswave.special_functions import DomainError


def scipy_rho(t, k, mu):
    nu = (mu - 1) / (2 * (1 - k))
    return t ** ((1 + mu) / 2) * special.kv(nu, t ** (1 - k) / (1 - k))


def scipy_lam(t, k, mu):
    nu = (mu - 1) / (2 * (1 - k))
    z = t ** (1 - k) / (1 - k)
    return mu / t - t ** (-k) * special.kv(nu + 1, z) / special.kv(nu, z)


def scipy_phi(r, N):
    if N == 1:
        return 2 * np.cosh(r)
    if N == 3:
        return 4 * np.pi * np.sinh(r) / r if r > 0 else 4 * np.pi
    return 2 * np.pi * special.iv(0, r)


def scipy_Cfg(mp):
    lam1 = scipy_lam(1.0, mp.k, mp.mu)
    area = {1: 1.0, 2: 2 * np.pi, 3: 4 * np.pi}[mp.N]
    jac = (lambda r: 2.0) if mp.N == 1 else (lambda r: area * r ** (mp.N - 1))

    def integrand(r):
        return ((mp.mu - lam1) * mp.f(r) + mp.g(r)) * scipy_phi(r, mp.N) * jac(r)
    val, _ = integrate.quad(integrand, 0.0, mp.R, epsabs=1e-14, epsrel=1e-13)
    return scipy_rho(1.0, mp.k, mp.mu) * val


def statistic(t, k, mu):
    nu = (mu - 1) / (2 * (1 - k))
    z = t ** (1 - k) / (1 - k)
    return 0.5 * np.log(z) + np.log(special.kve(nu, z))


class TestDataConstant:
    @pytest.mark.parametrize("N,k,mu", [(1, 0.0, 1.0), (1, 0.5, 0.5), (2, 0.25, 2.0), (3, 0.0, 0.0)])
    def test_against_quad(self, N, k, mu):
        mp = ModelParams(N=N, k=k, mu=mu)
        assert compute_Cfg(mp) == pytest.approx(scipy_Cfg(mp), rel=1e-9)

    def test_mesh_quadrature_close(self):
        mp = ModelParams(N=3, k=0.25, mu=1.0)
        m = Grid(1 / 128, 2.0).mesh(3)
        assert compute_Cfg(mp, mesh=m) == pytest.approx(compute_Cfg(mp), rel=1e-3)

    def test_zero_data_rejected(self):
        with pytest.raises(DomainError):
            compute_Cfg(ModelParams(f_profile="zero", g_profile="zero"))


class TestT0:
    @pytest.mark.parametrize("k,mu", [(0.0, 0.0), (0.0, 1.0), (0.5, 2.0), (0.0, 4.0), (0.0, 6.0), (0.5, 4.0)])
    def test_estimates_hold_beyond_half(self, k, mu):
        T0 = find_T0(ModelParams(k=k, mu=mu))
        assert T0 > 2.0
        t = np.geomspace(T0 / 2 * (1 + 1e-6), 1e5, 3000)
        s = statistic(t, k, mu)
        assert np.all(s > math.log(math.sqrt(math.pi) / 2))
        assert np.all(s < math.log(math.sqrt(math.pi)))

    @pytest.mark.parametrize("k,mu", [(0.0, 4.0), (0.0, 6.0), (0.5, 4.0)])
    def test_smallest(self, k, mu):
        # a failing parameter set: the statistic is outside the bracket just below T0/2
        T0 = find_T0(ModelParams(k=k, mu=mu))
        assert T0 > 4.0
        assert statistic(T0 / 2 * (1 - 1e-5), k, mu) >= math.log(math.sqrt(math.pi))

    def test_kappa(self):
        assert kappa(3.0, 0.0) == pytest.approx((1 - math.exp(-3.0)) / 8, rel=1e-15)
        T0, k = 5.0, 0.5
        want = (1 - math.exp(-(2 - math.sqrt(2)) * math.sqrt(T0) / 0.5)) / 8
        assert kappa(T0, k) == pytest.approx(want, rel=1e-15)
        assert 0 < kappa(2.0, 0.9) < 0.125

    def test_lower_bound_constants(self):
        mp = ModelParams(N=1, k=0.0, mu=1.0, p=1.8, eps=0.3)
        c = lower_bound_constants(mp)
        assert c["T1"] == 2 * c["T0"]
        assert c["C_U"] == pytest.approx(c["kappa"] * c["Cfg"], rel=1e-15)
        want = c["C_U"] * 0.5 ** 1.5 * (1 - math.exp(-0.5 * 2 * c["T0"]))
        assert c["C_V"] == pytest.approx(want, rel=1e-14)


class TestBoundReport:
    def test_pass_fail_with_slack(self):
        ok = BoundReport("x", 1.0, 0.96, 3.0, 2.0, 10)
        bad = BoundReport("x", 1.0, 0.94, 3.0, 2.0, 10)
        assert ok.passed and not bad.passed
        assert ok.slack == SLACK
        assert ok.margin == pytest.approx(-0.04)
        assert ok.to_dict()["passed"] is True

    def test_no_samples_after_start(self):
        mp = ModelParams(N=1, k=0.0, mu=1.0, p=1.8, eps=0.3)
        _, ser = run(mp, Grid.for_horizon(mp, 3.0, dx=1 / 32),
                     StoppingPolicy(T_max=3.0, sample_interval=0.5))
        c = dict(lower_bound_constants(mp), T0=10.0, T1=20.0)
        with pytest.raises(ValueError, match="no samples"):
            check_U_lower(ser, mp, c)


@pytest.fixture(scope="module")
def blowup_run():
    mp = ModelParams(N=1, k=0.0, mu=1.0, p=1.8, eps=0.3)
    out, ser = run(mp, Grid.for_horizon(mp, 60.0, dx=1 / 64),
                   StoppingPolicy(T_max=60.0, sample_interval=0.05))
    return mp, out, ser


class TestOnRun:
    def test_bounds_hold(self, blowup_run):
        mp, out, ser = blowup_run
        assert out.status == "blowup"
        c = lower_bound_constants(mp)
        a, b = check_U_lower(ser, mp, c), check_V_lower(ser, mp, c)
        assert a.passed and b.passed
        assert a.t_at_min >= c["T0"] and b.t_at_min >= c["T1"]

    def test_tracker_matches_direct_quadrature(self, blowup_run):
        mp, out, ser = blowup_run
        st = out.final_state
        assert ser.t[-1] == st.t
        assert ser.U[-1] == pytest.approx(compute_U(st, mp), rel=1e-10)
        assert ser.V[-1] == pytest.approx(compute_V(st, mp), rel=1e-10)

    def test_uv_relation_residual_small(self, blowup_run):
        _, _, ser = blowup_run
        res = uv_relation_residual(ser)[:100]
        assert np.max(np.abs(res)) < 2e-3

    def test_u_balance_relative_residual(self, blowup_run):
        mp, _, ser = blowup_run
        res = u_balance_residual(ser, mp, compute_Cfg(mp))
        scale = np.maximum(np.abs(ser.J), mp.eps * compute_Cfg(mp))
        sel = ser.t < 8.0
        assert np.max(np.abs(res[sel]) / scale[sel]) < 1e-3


def weak_residual_max(dx):
    mp = ModelParams(N=1, k=0.0, mu=1.0, p=1.8, eps=0.3)
    _, ser = run(mp, Grid.for_horizon(mp, 6.0, dx=dx), StoppingPolicy(T_max=6.0, sample_interval=0.25))
    return np.max(np.abs(ser.weak_residual) / ser.weak_scale)


def test_weak_residual_converges():
    e = [weak_residual_max(dx) for dx in (1 / 32, 1 / 64, 1 / 128)]
    orders = np.log2(np.array(e[:-1]) / e[1:])
    assert np.all(orders >= 1.5)


class TestConeIntegrals:
    def test_one_dimension_closed_form(self):
        mp = ModelParams(N=1, k=0.0, mu=1.0)
        t = 3.0
        L = mp.cone_radius(t)
        want = 4 * math.sinh(L) * scipy_rho(t, 0.0, 1.0)
        assert cone_integral_psi(t, mp) == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("N,r", [(1, 1.8), (3, 1.5), (2, 2.5)])
    def test_norm_ratio_bounded(self, N, r):
        mp = ModelParams(N=N, k=0.25, mu=1.0)
        ratios = []
        for t in np.geomspace(2.0, 400.0, 12):
            lhs, rhs = psi_norm_bound(float(t), r, mp)
            ratios.append(lhs / rhs)
        ratios = np.array(ratios)
        assert np.all(np.isfinite(ratios)) and np.all(ratios > 0)
        assert ratios.max() / ratios.min() < 20.0
        # the tail settles instead of drifting
        assert abs(ratios[-1] / ratios[-2] - 1) < 0.1

    def test_rejects_r_at_most_one(self):
        with pytest.raises(DomainError):
            psi_norm_bound(2.0, 1.0, ModelParams())
