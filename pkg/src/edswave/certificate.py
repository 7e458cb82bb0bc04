"""Numerical replay of the blow-up argument for V(t).

A :class:`Certificate` collects the constants of the argument for one
problem instance: the times T0 < T1 <= T2 < T3 after which the Bessel
asymptotics make the coefficient comparisons valid, the data constant
C(f,g) and the lower-bound constants, and the margins of the two
conditions on [T3, 100 T3].  Along a solver run,

    H(t) = C2 eps + (1/16) int_T3^t int |u_t|^p psi dx ds

must stay below V(t), and H obeys H' >= C H^p t^-a, whose equality case
blows up at the time given by :func:`kato_blowup_time_closed_form`.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
import json
import math

import numpy as np
from scipy.integrate import solve_ivp

from .exponents import ExponentQuery, LifespanBound, lifespan_bound, weight_exponent
from .functionals import SLACK, FunctionalSeries, _log_cone_integral, lower_bound_constants
from .model import ModelParams
from .special_functions import DEFAULT_CONTROLS, DomainError, EvalControls, rho_log_derivative

__all__ = [
    "ALPHA",
    "BRACKET",
    "Certificate",
    "KatoParams",
    "ConditionReport",
    "build_certificate",
    "bracket_conditions",
    "tail_conditions",
    "H_of_t",
    "F_of_t",
    "check_V_above_H",
    "H_growth_ratio",
    "kato_blowup_time_closed_form",
    "kato_integrate",
    "kato_constant_estimate",
    "kato_constant_from_run",
    "predicted_lifespan",
]

ALPHA = 0.2
# accepted range of -t^k rho'/rho when the coefficient comparisons are made
BRACKET = (0.5, 2.0)
_SEARCH_POINTS = 4001


def bracket_conditions(t, mp: ModelParams, ctl: EvalControls = DEFAULT_CONTROLS):
    """Margins of the three comparisons that start the differential inequality.

    Columns: (2 - m, m - 1/2) with m = -t^k rho'/rho, then
    lam (mu/t - lam) + 4 t^-2k and -lam - t^-k / 2.  All must be >= 0.
    """
    t = np.asarray(t, dtype=float)
    lam = rho_log_derivative(t, mp.spacetime, ctl)
    m = -t ** mp.k * lam
    lo, hi = BRACKET
    return np.stack([
        hi - m,
        m - lo,
        lam * (mp.mu / t - lam) + 4.0 * t ** (-2.0 * mp.k),
        -lam - 0.5 * t ** (-mp.k),
    ], axis=-1)


def _damping_factor(t, mp, alpha, ctl):
    """t^k (mu/t - (1 + alpha) rho'/rho)."""
    lam = rho_log_derivative(t, mp.spacetime, ctl)
    return t ** mp.k * (mp.mu / t - (1.0 + alpha) * lam)


def tail_conditions(t, mp: ModelParams, alpha, Cfg, C2, ctl: EvalControls = DEFAULT_CONTROLS):
    """Margins of the two conditions that make V - H nondecreasing in weight.

    Column 0: alpha Cfg / 2 - C2 t^k (mu/t - (1+alpha) rho'/rho);
    column 1: alpha / 2 - (1/16) t^k (mu/t - (1+alpha) rho'/rho).
    """
    t = np.asarray(t, dtype=float)
    d = _damping_factor(t, mp, alpha, ctl)
    return np.stack([0.5 * alpha * Cfg - C2 * d, 0.5 * alpha - d / 16.0], axis=-1)


def _first_tail_time(t_from, holds, t_limit, what):
    """Smallest t >= t_from with holds(t') for every sampled t' >= t."""
    grid = np.geomspace(t_from, t_limit, _SEARCH_POINTS)
    ok = holds(grid)
    if not ok[-1]:
        raise DomainError(f"{what}: conditions still fail at t = {t_limit:g}")
    bad = np.nonzero(~ok)[0]
    if bad.size == 0:
        return float(t_from)
    lo, hi = grid[bad[-1]], grid[bad[-1] + 1]
    while hi - lo > 1e-9 * hi:
        mid = 0.5 * (lo + hi)
        if holds(np.array([mid]))[0]:
            hi = mid
        else:
            lo = mid
    return float(hi)


@dataclass(frozen=True)
class ConditionReport:
    name: str
    worst_margin: float
    t_at_worst: float
    t_from: float
    t_to: float
    n_samples: int
    limit_margin: float

    @property
    def passed(self):
        return self.worst_margin >= 0.0 and self.limit_margin > 0.0

    def to_dict(self):
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass
class Certificate:
    params: ModelParams
    alpha: float
    T0: float
    T1: float
    T2_tilde: float
    T3_tilde: float
    Cfg: float
    kappa: float
    C_U: float
    C_V: float
    C2: float
    checks: dict = field(default_factory=dict)
    convention: str = "-t^k rho'/rho in [1/2, 2]"

    @property
    def H0(self):
        return self.C2 * self.params.eps

    @property
    def passed(self):
        return all(rep.passed for rep in self.checks.values())

    def to_dict(self):
        out = {name: getattr(self, name) for name in
               ("alpha", "T0", "T1", "T2_tilde", "T3_tilde", "Cfg", "kappa",
                "C_U", "C_V", "C2", "convention")}
        out["params"] = self.params.to_dict()
        out["H0"] = self.H0
        out["checks"] = {name: rep.to_dict() for name, rep in self.checks.items()}
        out["passed"] = self.passed
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _report(name, margins, t, limit_margin):
    i = int(np.argmin(margins))
    return ConditionReport(name, float(margins[i]), float(t[i]), float(t[0]), float(t[-1]),
                           int(t.size), float(limit_margin))


def build_certificate(mp: ModelParams, ctl: EvalControls = DEFAULT_CONTROLS,
                      alpha: float = ALPHA, t_limit: float = 1e6,
                      n_check: int = 200) -> Certificate:
    """Constants and threshold times of the blow-up argument for ``mp``."""
    if not 1.0 / 7.0 < alpha < 0.25:
        raise DomainError(f"alpha must lie in (1/7, 1/4), got {alpha!r}")
    c = lower_bound_constants(mp, ctl)
    Cfg, C_V = c["Cfg"], c["C_V"]
    C2 = min(alpha * Cfg / (4.0 * (1.0 + alpha)), C_V)

    T2 = _first_tail_time(
        c["T1"], lambda t: np.all(bracket_conditions(t, mp, ctl) >= 0.0, axis=-1),
        t_limit, "coefficient bracket")
    T3 = _first_tail_time(
        T2, lambda t: np.all(tail_conditions(t, mp, alpha, Cfg, C2, ctl) >= 0.0, axis=-1),
        t_limit, "tail conditions")
    T3 = max(T3, T2 * (1.0 + 1e-9))

    # t^k rho'/rho -> -1, so the damping factor tends to 1 + alpha
    lim = 1.0 + alpha
    checks = {}
    ts = np.geomspace(T2, 100.0 * T2, n_check)
    b = bracket_conditions(ts, mp, ctl)
    checks["bracket"] = _report("bracket", b.min(axis=-1), ts,
                                min(BRACKET[1] - 1.0, 1.0 - BRACKET[0]))
    ts = np.geomspace(T3, 100.0 * T3, n_check)
    m = tail_conditions(ts, mp, alpha, Cfg, C2, ctl)
    checks["tail_data"] = _report("tail_data", m[:, 0], ts, 0.5 * alpha * Cfg - C2 * lim)
    checks["tail_weight"] = _report("tail_weight", m[:, 1], ts, 0.5 * alpha - lim / 16.0)
    return Certificate(mp, alpha, c["T0"], c["T1"], T2, T3, Cfg, c["kappa"],
                       c["C_U"], C_V, C2, checks)


def _after_T3(series: FunctionalSeries, cert: Certificate):
    t = series.t
    if t[-1] < cert.T3_tilde:
        raise DomainError(
            f"run ends at t = {t[-1]:g}, before T3 = {cert.T3_tilde:g}")
    sel = t >= cert.T3_tilde
    return t, sel


def H_of_t(series: FunctionalSeries, cert: Certificate):
    """(t, H(t)) at the samples with t >= T3.

    The nonlinear integral from T3 is J(t) - J(T3), with J(T3)
    interpolated linearly when T3 is not a sample time.
    """
    t, sel = _after_T3(series, cert)
    J = series.J
    J3 = float(np.interp(cert.T3_tilde, t, J))
    if not cert.params.nonlinearity_on:
        J = np.zeros_like(J)
        J3 = 0.0
    return t[sel], cert.H0 + (J[sel] - J3) / 16.0


def F_of_t(series: FunctionalSeries, cert: Certificate):
    """(t, V(t) - H(t)) at the samples with t >= T3."""
    t, H = H_of_t(series, cert)
    _, sel = _after_T3(series, cert)
    return t, series.V[sel] - H


@dataclass(frozen=True)
class VHReport:
    min_ratio: float      # min (V - H) / H
    t_at_min: float
    n_samples: int
    slack: float = SLACK

    @property
    def passed(self):
        return self.n_samples > 0 and self.min_ratio >= -self.slack

    def to_dict(self):
        out = asdict(self)
        out["passed"] = self.passed
        return out


def check_V_above_H(series: FunctionalSeries, cert: Certificate, slack: float = SLACK) -> VHReport:
    """V >= H on every sample t >= T3, up to ``slack`` relative to H."""
    t, H = H_of_t(series, cert)
    _, F = F_of_t(series, cert)
    ratio = F / H
    i = int(np.argmin(ratio))
    return VHReport(float(ratio[i]), float(t[i]), int(t.size), slack)


def H_growth_ratio(series: FunctionalSeries, cert: Certificate, T_blow: float) -> float:
    """H(T_blow) / H(0.9 T_blow), interpolated on the samples."""
    t, H = H_of_t(series, cert)
    t_a = max(0.9 * T_blow, cert.T3_tilde)
    return float(np.interp(T_blow, t, H) / np.interp(t_a, t, H))


@dataclass(frozen=True)
class KatoParams:
    """H' = C H^p t^-a from H(T3) = H0."""

    C: float
    a: float
    H0: float
    T3: float

    def __post_init__(self):
        if not (self.C > 0.0 and self.H0 > 0.0 and self.T3 > 0.0):
            raise DomainError(f"C, H0 and T3 must be positive: {self}")


def kato_blowup_time_closed_form(kp: KatoParams, p: float):
    """Blow-up time of the equality case, or ``None`` if H stays finite."""
    if not p > 1.0:
        raise DomainError(f"p must be > 1, got {p!r}")
    mass = kp.H0 ** (1.0 - p) / (kp.C * (p - 1.0))
    if kp.a == 1.0:
        return kp.T3 * math.exp(mass)
    base = kp.T3 ** (1.0 - kp.a) + (1.0 - kp.a) * mass
    if base <= 0.0:
        return None
    return base ** (1.0 / (1.0 - kp.a))


def kato_integrate(kp: KatoParams, p: float, rtol: float = 1e-10,
                   blowup_factor: float = 1e12, t_span_factor: float = 1e9):
    """Blow-up time of H' = C H^p t^-a found by adaptive integration.

    Integrates t as a function of y = log H, dt/dy = t^a exp(-(p-1) y) / C,
    which stays smooth up to the blow-up, with an 8th-order Runge-Kutta
    scheme until H = blowup_factor * H0, then adds the time the remaining
    growth takes with t frozen, H^(1-p) t^a / (C (p-1)).  Returns ``None``
    when t passes ``t_span_factor * T3`` first, i.e. H stays bounded.
    """
    if not p > 1.0:
        raise DomainError(f"p must be > 1, got {p!r}")
    C, a = kp.C, kp.a
    y0 = math.log(kp.H0)
    y_end = y0 + math.log(blowup_factor)
    t_cap = kp.T3 * t_span_factor

    def rhs(y, t):
        return [math.exp(a * math.log(t[0]) - (p - 1.0) * y) / C]

    def escaped(y, t):
        return t[0] - t_cap
    escaped.terminal = True
    escaped.direction = 1

    sol = solve_ivp(rhs, (y0, y_end), [kp.T3], method="DOP853",
                    rtol=rtol, atol=1e-300, events=escaped)
    if sol.status != 0:
        return None
    t_e = float(sol.y[0, -1])
    return t_e + math.exp((1.0 - p) * y_end) * t_e ** a / (C * (p - 1.0))


def kato_constant_estimate(mp: ModelParams, cert: Certificate,
                           ctl: EvalControls = DEFAULT_CONTROLS, n: int = 60) -> float:
    """min over [T3, 100 T3] of t^a (int_cone psi)^-(p-1) / 16.

    This is the largest C for which H' >= (1/16) V^p (int_cone psi)^-(p-1)
    implies H' >= C V^p t^-a on the window.
    """
    q = ExponentQuery(mp.N, mp.k, mp.mu)
    a = weight_exponent(q, mp.p)
    ts = np.geomspace(cert.T3_tilde, 100.0 * cert.T3_tilde, n)
    logs = np.array([a * math.log(t) - (mp.p - 1.0) * _log_cone_integral(t, mp, 1.0, ctl)
                     for t in ts])
    return float(np.exp(logs.min())) / 16.0


def kato_constant_from_run(series: FunctionalSeries, cert: Certificate) -> float:
    """min over samples t >= T3 of H'(t) / (H^p t^-a), with H' = NL / 16."""
    mp = cert.params
    t, H = H_of_t(series, cert)
    _, sel = _after_T3(series, cert)
    a = weight_exponent(ExponentQuery(mp.N, mp.k, mp.mu), mp.p)
    ratio = (series.NL[sel] / 16.0) / (H ** mp.p * t ** (-a))
    return float(ratio.min())


def predicted_lifespan(mp: ModelParams, cert: Certificate, C: float | None = None,
                       ctl: EvalControls = DEFAULT_CONTROLS):
    """Lifespan bound shape plus a numeric estimate.

    Returns ``(bound, info)``.  ``info["estimate"]`` is the leading term of
    the Kato blow-up time as eps -> 0: K eps^exponent when subcritical,
    T3 exp(K eps^-(p-1)) when critical.  The constant C defaults to
    :func:`kato_constant_estimate`; the value is an estimate, not a proven
    bound.  ``info["kato_time"]`` is the full closed-form blow-up time.
    """
    q = ExponentQuery(mp.N, mp.k, mp.mu)
    bound: LifespanBound = lifespan_bound(q, mp.p, mp.eps) if mp.eps > 0 else lifespan_bound(q, mp.p)
    if bound.regime == "supercritical":
        raise DomainError(f"no lifespan bound for supercritical p = {mp.p!r}")
    C = kato_constant_estimate(mp, cert, ctl) if C is None else float(C)
    p = mp.p
    a = weight_exponent(q, p)
    K = cert.C2 ** (1.0 - p) / (C * (p - 1.0))
    if bound.regime == "subcritical":
        estimate = ((1.0 - a) * K) ** (1.0 / (1.0 - a)) * mp.eps ** bound.exponent
    else:
        estimate = cert.T3_tilde * math.exp(K * mp.eps ** (1.0 - p))
    H0 = cert.C2 * mp.eps
    kato_time = (kato_blowup_time_closed_form(KatoParams(C, a, H0, cert.T3_tilde), p)
                 if mp.eps > 0 else None)
    info = dict(estimate=estimate, kato_time=kato_time, C=C, a=a, H0=H0,
                label="estimate")
    return bound, info
