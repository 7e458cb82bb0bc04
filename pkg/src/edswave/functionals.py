"""Weighted averages of the solution against psi = phi(x) rho(t).

U(t) = int u psi dx and V(t) = int u_t psi dx are the two functionals of the
blow-up argument.  :class:`FunctionalTracker` accumulates them, together with
the time integrals of the weak formulation, at every solver step; the
remaining functions compute the data constant C(f,g), the time T0 after
which the Bessel factor is close to its asymptotics, and the lower-bound
checks U >= C_U eps t^k and V >= C_V eps.

All spatial integrals use the mesh node weights, the same quadrature the
solver's Laplacian is conservative for, so that the discrete weak-form
defect only carries time-discretisation error.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .model import FieldState, Mesh, ModelParams
from .special_functions import (
    DEFAULT_CONTROLS, DomainError, EvalControls, log_bessel_k_scaled,
    log_phi_radial, log_rho, log_rho_scaled, phi_k, rho_log_derivative,
    sphere_area,
)

__all__ = [
    "FunctionalSample",
    "FunctionalSeries",
    "FunctionalTracker",
    "BoundReport",
    "compute_U",
    "compute_V",
    "compute_Cfg",
    "find_T0",
    "kappa",
    "lower_bound_constants",
    "check_U_lower",
    "check_V_lower",
    "psi_norm_bound",
    "cone_integral_psi",
    "u_balance_residual",
    "uv_relation_residual",
]

SLACK = 0.05


def _psi_on_mesh(mesh: Mesh, mp: ModelParams, t, ctl=DEFAULT_CONTROLS):
    logphi = log_phi_radial(mesh.radius, mp.N, ctl)
    return np.exp(np.minimum(logphi + log_rho(t, mp.spacetime, ctl), 700.0))


def compute_U(state: FieldState, mp: ModelParams, ctl: EvalControls = DEFAULT_CONTROLS):
    """U(t) = int u(x,t) psi(x,t) dx on the state's mesh."""
    return state.mesh.integrate(state.u * _psi_on_mesh(state.mesh, mp, state.t, ctl))


def compute_V(state: FieldState, mp: ModelParams, ctl: EvalControls = DEFAULT_CONTROLS):
    """V(t) = int u_t(x,t) psi(x,t) dx on the state's mesh."""
    return state.mesh.integrate(state.v * _psi_on_mesh(state.mesh, mp, state.t, ctl))


@dataclass(frozen=True)
class FunctionalSample:
    t: float
    U: float
    V: float
    weak_residual: float


@dataclass
class FunctionalSeries:
    """Sampled functionals of one run; columns are numpy arrays.

    ``J`` is int_1^t int |u_t|^p psi, ``A3``..``A5`` the remaining time
    integrals of the weak form (u_t psi_t, s^-2k grad u . grad psi and
    mu/s u_t psi), ``NL`` the instantaneous int |u_t|^p psi and ``lam``
    rho'/rho at the sample time.
    """

    params: ModelParams
    V1: float = 0.0
    columns: dict = field(default_factory=dict)
    states: list = field(default_factory=list)

    NAMES = ("t", "U", "V", "J", "A3", "A4", "A5", "NL", "lam",
             "max_u", "max_v", "support_violation")

    def __post_init__(self):
        for name in self.NAMES:
            self.columns.setdefault(name, [])

    def append(self, **row):
        if self.columns["t"] and not row["t"] > self.columns["t"][-1]:
            raise ValueError("sample times must be strictly increasing")
        for name in self.NAMES:
            self.columns[name].append(float(row[name]))

    def __len__(self):
        return len(self.columns["t"])

    def __getattr__(self, name):
        cols = self.__dict__.get("columns")
        if cols is not None and name in cols:
            return np.asarray(cols[name], dtype=float)
        raise AttributeError(name)

    @property
    def weak_terms(self):
        """(V(t), V(1), A3, A4, A5, J) as arrays."""
        return (self.V, np.full(len(self), self.V1), self.A3, self.A4, self.A5, self.J)

    @property
    def weak_residual(self):
        """Signed defect of the weak formulation with test function psi."""
        V, V1, A3, A4, A5, J = self.weak_terms
        return V - V1 - A3 + A4 + A5 - J

    @property
    def weak_scale(self):
        return np.max(np.abs(np.vstack(self.weak_terms)), axis=0)

    def samples(self):
        res = self.weak_residual
        for i, t in enumerate(self.t):
            yield FunctionalSample(float(t), float(self.U[i]), float(self.V[i]), float(res[i]))

    def to_dict(self):
        out = {name: list(self.columns[name]) for name in self.NAMES}
        out["weak_residual"] = [float(x) for x in self.weak_residual]
        out["V1"] = self.V1
        return out


class FunctionalTracker:
    """Online accumulation of U, V and the weak-form time integrals.

    ``push`` is called after every step.  It only evaluates reductions
    against exp(log phi - phi_k(t)); the rho-dependent factor
    exp(log rho + phi_k) and rho'/rho are applied in batches by ``flush``,
    which keeps Bessel quadratures out of the step loop.
    """

    def __init__(self, mp: ModelParams, mesh: Mesh, ctl: EvalControls = DEFAULT_CONTROLS):
        self.mp = mp
        self.mesh = mesh
        self.ctl = ctl
        self.sp = mp.spacetime
        self.logphi = log_phi_radial(mesh.radius, mp.N, ctl)
        self._inv_dx = 1.0 / mesh.dx
        self._t = []
        self._hats = []
        self._last = None
        self.J = self.A3 = self.A4 = self.A5 = 0.0
        self.current = None

    def push(self, t, u, v, lo=0, hi=None):
        """Reduce the step at time t, optionally over nodes lo:hi only."""
        hi = self.mesh.size if hi is None else hi
        shift = float(phi_k(t, self.sp))
        self._t.append(float(t))
        self._hats.append(kernels.reductions(
            u[lo:hi], v[lo:hi], self.logphi[lo:hi], shift, self.mesh.w_node[lo:hi],
            self.mesh.w_face[lo:hi + 1], self._inv_dx, float(self.mp.p)))

    def flush(self):
        """Fold buffered steps into the running integrals; returns the newest values."""
        if not self._t:
            return self.current
        t = np.asarray(self._t)
        hats = np.asarray(self._hats)
        self._t.clear()
        self._hats.clear()
        scale = np.exp(log_rho_scaled(t, self.sp, self.ctl))
        lam = rho_log_derivative(t, self.sp, self.ctl)
        U, V, G, NL = (hats * scale[:, None]).T
        integrands = np.vstack([
            NL if self.mp.nonlinearity_on else np.zeros_like(NL),
            lam * V,
            t ** (-2.0 * self.mp.k) * G,
            self.mp.mu / t * V,
        ])
        if self._last is not None:
            t_prev, f_prev = self._last
            tt = np.concatenate(([t_prev], t))
            ff = np.hstack([f_prev[:, None], integrands])
            incr = 0.5 * np.diff(tt) * (ff[:, 1:] + ff[:, :-1])
            self.J, self.A3, self.A4, self.A5 = (
                np.array([self.J, self.A3, self.A4, self.A5]) + incr.sum(axis=1))
        self._last = (t[-1], integrands[:, -1].copy())
        self.current = dict(t=float(t[-1]), U=float(U[-1]), V=float(V[-1]),
                            NL=float(NL[-1]), lam=float(lam[-1]),
                            J=float(self.J), A3=float(self.A3),
                            A4=float(self.A4), A5=float(self.A5))
        return self.current


def compute_Cfg(mp: ModelParams, ctl: EvalControls = DEFAULT_CONTROLS, mesh: Mesh | None = None):
    """C(f,g) = rho(1) int [(mu - rho'(1)/rho(1)) f + g] phi dx.

    Without a mesh the integral over the data support uses 64-point
    Gauss-Legendre in the radius; with a mesh, the mesh quadrature.
    """
    sp = mp.spacetime
    rho1 = math.exp(float(log_rho(1.0, sp, ctl)))
    lam1 = float(rho_log_derivative(1.0, sp, ctl))
    if mesh is not None:
        r = mesh.radius
        w = mesh.w_node
    else:
        x, wq = np.polynomial.legendre.leggauss(64)
        r = 0.5 * mp.R * (x + 1.0)
        w = 0.5 * mp.R * wq * (sphere_area(mp.N) * r ** (mp.N - 1))
    integrand = ((mp.mu - lam1) * mp.f(r) + mp.g(r)) * np.exp(log_phi_radial(r, mp.N, ctl))
    value = rho1 * float(np.dot(w, integrand))
    if not value > 0.0:
        raise DomainError(f"C(f,g) must be positive for admissible data, got {value!r}")
    return value


def _est_double_statistic(z, nu, ctl):
    """log(sqrt(z) e^z K_nu(z)); the two T0 inequalities bracket it."""
    return 0.5 * np.log(z) + log_bessel_k_scaled(nu, z, ctl)


_T0_LOW = math.log(math.sqrt(math.pi) / 2.0)
_T0_HIGH = math.log(math.sqrt(math.pi))


def _est_double_holds(t, mp, ctl=DEFAULT_CONTROLS):
    z = phi_k(np.asarray(t, dtype=float), mp.spacetime)
    s = _est_double_statistic(z, mp.spacetime.nu, ctl)
    return (s > _T0_LOW) & (s < _T0_HIGH)


def find_T0(mp: ModelParams, ctl: EvalControls = DEFAULT_CONTROLS, t_limit: float = 1e6):
    """Smallest T0 > 2 with both Bessel estimates valid on [T0/2, inf).

    The estimates read phi_k K_nu(phi_k)^2 > (pi/4) e^(-2 phi_k) and
    1 / (phi_k K_nu(phi_k)^2) > e^(2 phi_k) / pi.  They are checked on a
    dense geometric sample of [1, t_limit]; the limit value log sqrt(pi/2)
    of the statistic lies strictly inside the bracket.
    """
    grid = np.geomspace(1.0, t_limit, 4001)
    ok = _est_double_holds(grid, mp, ctl)
    if not ok[-1]:
        raise DomainError(f"Bessel estimates still fail at t = {t_limit:g}; parameters {mp}")
    bad = np.nonzero(~ok)[0]
    if bad.size == 0:
        half = 1.0
    else:
        lo, hi = grid[bad[-1]], grid[bad[-1] + 1]
        while hi - lo > 1e-7 * hi:
            mid = 0.5 * (lo + hi)
            if _est_double_holds(mid, mp, ctl):
                hi = mid
            else:
                lo = mid
        half = hi
    return max(2.0 * half, 2.0 * (1.0 + 1e-6))


def kappa(T0: float, k: float) -> float:
    return 0.125 * (1.0 - math.exp(-(2.0 - 2.0 ** k) * T0 ** (1.0 - k) / (1.0 - k)))


def lower_bound_constants(mp: ModelParams, ctl: EvalControls = DEFAULT_CONTROLS, T0=None, Cfg=None):
    """T0, T1, C(f,g), kappa, C_U and C_V as a dict."""
    T0 = find_T0(mp, ctl) if T0 is None else T0
    Cfg = compute_Cfg(mp, ctl) if Cfg is None else Cfg
    kap = kappa(T0, mp.k)
    C_U = kap * Cfg
    C_V = C_U * 0.5 ** (0.5 * mp.mu + 1.0) * (
        1.0 - math.exp(-(1.0 - 2.0 ** (mp.k - 1.0)) * (2.0 * T0) ** (1.0 - mp.k) / (1.0 - mp.k)))
    return dict(T0=T0, T1=2.0 * T0, Cfg=Cfg, kappa=kap, C_U=C_U, C_V=C_V)


@dataclass(frozen=True)
class BoundReport:
    name: str
    constant: float
    min_ratio: float
    t_at_min: float
    t_from: float
    n_samples: int
    slack: float = SLACK

    @property
    def passed(self) -> bool:
        return self.min_ratio >= (1.0 - self.slack) * self.constant

    @property
    def margin(self) -> float:
        """Relative excess of the observed minimum over the constant."""
        return self.min_ratio / self.constant - 1.0

    def to_dict(self):
        return dict(name=self.name, constant=self.constant, min_ratio=self.min_ratio,
                    t_at_min=self.t_at_min, t_from=self.t_from,
                    n_samples=self.n_samples, slack=self.slack,
                    passed=self.passed, margin=self.margin)


def _min_ratio(name, t, ratio, t_from, constant, slack):
    sel = t >= t_from
    if not np.any(sel):
        raise ValueError(f"{name}: no samples at or beyond t = {t_from:g}")
    i = int(np.argmin(np.where(sel, ratio, np.inf)))
    return BoundReport(name, constant, float(ratio[i]), float(t[i]), t_from,
                       int(sel.sum()), slack)


def check_U_lower(series: FunctionalSeries, mp: ModelParams, constants=None,
                  slack: float = SLACK) -> BoundReport:
    """min over t >= T0 of U(t) / (eps t^k) against C_U = kappa C(f,g)."""
    c = lower_bound_constants(mp) if constants is None else constants
    t = series.t
    return _min_ratio("U >= C_U eps t^k", t, series.U / (mp.eps * t ** mp.k),
                      c["T0"], c["C_U"], slack)


def check_V_lower(series: FunctionalSeries, mp: ModelParams, constants=None,
                  slack: float = SLACK) -> BoundReport:
    """min over t >= T1 = 2 T0 of V(t) / eps against C_V."""
    c = lower_bound_constants(mp) if constants is None else constants
    return _min_ratio("V >= C_V eps", series.t, series.V / mp.eps,
                      c["T1"], c["C_V"], slack)


def _log_cone_integral(t, mp: ModelParams, r: float, ctl=DEFAULT_CONTROLS, panels=64):
    """log of int_{|x| <= phi_k(t) + R} psi^r dx."""
    L = float(mp.cone_radius(t))
    x, w = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(0.0, L, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    s = (0.5 * (b - a) * (x + 1.0) + a).ravel()
    ws = (0.5 * (b - a) * w).ravel()
    if mp.N == 1:
        log_w = np.log(2.0 * ws)
    else:
        log_w = np.log(sphere_area(mp.N) * ws) + (mp.N - 1) * np.log(s)
    g = log_w + r * log_phi_radial(s, mp.N, ctl)
    top = g.max()
    return top + math.log(np.sum(np.exp(g - top))) + r * float(log_rho(t, mp.spacetime, ctl))


def cone_integral_psi(t, mp: ModelParams, r: float = 1.0, ctl=DEFAULT_CONTROLS):
    return math.exp(_log_cone_integral(t, mp, r, ctl))


def psi_norm_bound(t, r, mp: ModelParams, ctl: EvalControls = DEFAULT_CONTROLS):
    """(int_cone psi^r, rho^r e^(r phi_k) (1 + phi_k)^((2-r)(N-1)/2)).

    The ratio of the two is what stays bounded in t.
    """
    if not r > 1.0:
        raise DomainError("psi_norm_bound needs r > 1")
    lhs = math.exp(_log_cone_integral(t, mp, r, ctl))
    z = float(phi_k(t, mp.spacetime))
    log_rhs = (r * float(log_rho(t, mp.spacetime, ctl)) + r * z
               + 0.5 * (2.0 - r) * (mp.N - 1) * math.log1p(z))
    return lhs, math.exp(log_rhs)


def u_balance_residual(series: FunctionalSeries, mp: ModelParams, Cfg: float):
    """U' + Gamma U - J - eps C(f,g), Gamma = mu/t - 2 rho'/rho, with U' = V + (rho'/rho) U."""
    t, U, V, J, lam = series.t, series.U, series.V, series.J, series.lam
    dU = V + lam * U
    return dU + (mp.mu / t - 2.0 * lam) * U - J - mp.eps * Cfg


def uv_relation_residual(series: FunctionalSeries):
    """Relative defect of U' - (rho'/rho) U = V with U' from centred differences.

    Returned for interior samples; meaningful when samples are dense and
    evenly spaced.
    """
    t, U, V, lam = series.t, series.U, series.V, series.lam
    dU = (U[2:] - U[:-2]) / (t[2:] - t[:-2])
    res = dU - lam[1:-1] * U[1:-1] - V[1:-1]
    return res / np.max(np.abs(V))
