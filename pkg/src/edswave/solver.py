"""Explicit finite-difference solver for

    u_tt - t^(-2k) Delta u + (mu / t) u_t = |u_t|^p,   t >= 1,
    u(x, 1) = eps f(x),  u_t(x, 1) = eps g(x),

in one space dimension or in radial symmetry.  Space: conservative
second-order three-point Laplacian.  Time: classical RK4 with the damping
integrated exactly by an integrating factor and the nonlinearity evaluated
explicitly at the stage values.  Runs stop on a blow-up proxy (huge |u_t|
together with a vanishing stable step), at T_max, or on an invariant
violation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .functionals import FunctionalSeries, FunctionalTracker
from .model import ConfigError, FieldState, Grid, ModelParams
from .special_functions import phi_k

__all__ = [
    "StoppingPolicy",
    "SolveOutcome",
    "EquationCoefficients",
    "physical_coefficients",
    "rescaled_coefficients",
    "init_state",
    "stable_dt",
    "step",
    "run",
    "support_violation",
    "rescaled_run_compare",
]


@dataclass(frozen=True)
class StoppingPolicy:
    T_max: float = 50.0
    sample_interval: float = 0.25
    sample_times: tuple | None = None   # explicit sample times replace the interval
    blowup_factor: float = 1e8
    dt_min: float = 1e-12
    support_tol: float = 1e-6
    check_support: bool = True
    track_functionals: bool = True
    keep_states: bool = False
    max_steps: int = 20_000_000

    def __post_init__(self):
        if not self.T_max > 1.0:
            raise ConfigError("T_max must exceed the initial time 1")
        if not self.sample_interval > 0.0:
            raise ConfigError("sample_interval must be positive")


@dataclass
class SolveOutcome:
    status: str                      # "blowup" | "survived" | "aborted"
    T_blow: float | None
    max_ut: float
    step_count: int
    diagnostics: dict = field(default_factory=dict)
    final_state: FieldState | None = field(default=None, repr=False)

    def to_dict(self):
        return dict(status=self.status, T_blow=self.T_blow, max_ut=self.max_ut,
                    step_count=self.step_count, diagnostics=dict(self.diagnostics))


@dataclass(frozen=True)
class EquationCoefficients:
    """u'' = A s^(-2 ks) Delta u - (B / s) u' + W s^q |u'|^p in time variable s."""

    A: float
    ks: float
    B: float
    W: float
    q: float
    s0: float

    def speed(self, s):
        return math.sqrt(self.A) * s ** (-self.ks)


def physical_coefficients(mp: ModelParams) -> EquationCoefficients:
    return EquationCoefficients(1.0, mp.k, mp.mu, 1.0, 0.0, 1.0)


def rescaled_coefficients(mp: ModelParams) -> EquationCoefficients:
    """Coefficients of the same problem in tau = phi_k(t).

    v_tautau - Delta v + (mu - k) / ((1 - k) tau) v_tau
        = (1 - k)^(mu_k (p - 2)) tau^(mu_k (p - 2)) |v_tau|^p,  mu_k = -k / (1 - k),
    starting at tau = 1 / (1 - k).
    """
    k = mp.k
    mu_k = -k / (1.0 - k)
    expo = mu_k * (mp.p - 2.0)
    return EquationCoefficients(1.0, 0.0, (mp.mu - k) / (1.0 - k),
                                (1.0 - k) ** expo, expo, 1.0 / (1.0 - k))


def init_state(mp: ModelParams, g: Grid, s0: float = 1.0) -> FieldState:
    """u = eps f, u_t = eps g sampled on the grid."""
    if 2.0 * mp.R / g.dx < 32.0 - 1e-9:
        raise ConfigError(
            f"grid under-resolves the data: 2R/dx = {2.0 * mp.R / g.dx:.3g} < 32")
    if g.r_max < mp.R + g.min_clearance:
        raise ConfigError("grid does not contain the data support with margin")
    mesh = g.mesh(mp.N)
    u = mp.eps * mp.f(mesh.radius)
    v = mp.eps * mp.g(mesh.radius)
    return FieldState(float(s0), u, v, mesh)


def _stable_dt(s, max_v, coeffs: EquationCoefficients, g: Grid, p):
    dt = g.cfl_safety * g.dx / coeffs.speed(s)
    if coeffs.B > 0.0:
        dt = min(dt, s / (10.0 * coeffs.B))
    if max_v > 0.0:
        rate = p * coeffs.W * s ** coeffs.q * max_v ** (p - 1.0)
        if math.isfinite(rate) and rate > 0.0:
            dt = min(dt, g.cfl_safety / rate)
        elif not math.isfinite(rate):
            dt = 0.0
    return dt


def stable_dt(state: FieldState, g: Grid, mp: ModelParams) -> float:
    """CFL step cfl dx t^k, capped by t / (10 mu) and cfl / (p max|u_t|^(p-1))."""
    if state.t < 1.0:
        raise ConfigError("stable_dt needs t >= 1")
    max_v = state.max_v if mp.nonlinearity_on else 0.0
    return _stable_dt(state.t, max_v, physical_coefficients(mp), g, mp.p)


def _advance(state: FieldState, dt, coeffs: EquationCoefficients, p, nonlin):
    m = state.mesh
    u, v = kernels.rk4_step(state.u, state.v, float(state.t), float(dt), m.cm, m.c0, m.cp,
                            coeffs.A, coeffs.ks, coeffs.B, coeffs.W, coeffs.q,
                            float(p), bool(nonlin))
    return FieldState(state.t + dt, u, v, m)


def step(state: FieldState, dt: float, g: Grid, mp: ModelParams) -> FieldState:
    """One RK4 step of the physical equation.  Non-finite output is returned
    as is; deciding whether it is a blow-up is up to the caller."""
    return _advance(state, dt, physical_coefficients(mp), mp.p, mp.nonlinearity_on)


def _violation(state: FieldState, cone):
    outside = state.mesh.radius > cone + 2.0 * state.mesh.dx
    if not np.any(outside):
        return 0.0
    return float(np.max(np.abs(state.u[outside])))


def support_violation(state: FieldState, mp: ModelParams, tol: float | None = None) -> float:
    """max |u| beyond phi_k(t) + R + 2 dx.

    With ``tol`` given, the value is divided by ``tol * max|u|`` so that a
    result above 1 flags a violation.
    """
    val = _violation(state, float(mp.cone_radius(state.t)))
    if tol is None:
        return val
    scale = tol * state.max_u
    return val / scale if scale > 0.0 else (0.0 if val == 0.0 else math.inf)


def _sample_schedule(stop: StoppingPolicy, s0, s_end):
    if stop.sample_times is not None:
        times = sorted(float(x) for x in stop.sample_times if s0 < x <= s_end)
    else:
        n = int(math.floor((s_end - s0) / stop.sample_interval + 1e-9))
        times = [s0 + i * stop.sample_interval for i in range(1, n + 1)]
    if not times or times[-1] < s_end:
        times.append(s_end)
    return times


def _window(mesh, reach):
    """Index range of the nodes with radius <= reach."""
    cells = int(math.ceil(reach / mesh.dx))
    if mesh.N == 1:
        mid = mesh.size // 2
        return max(0, mid - cells), min(mesh.size, mid + cells + 1)
    return 0, min(mesh.size, cells + 1)


def _march(mp: ModelParams, g: Grid, stop: StoppingPolicy, coeffs: EquationCoefficients,
           s_end: float, cone_fn, track: bool):
    """Shared time loop for the physical and the rescaled equation.

    Only the nodes within ``2 * min_clearance`` of the support cone are
    updated; the rest of the grid holds zeros (up to roundoff-sized leakage)
    and acts as a homogeneous Dirichlet boundary well outside the cone.
    """
    state = init_state(mp, g, coeffs.s0)
    mesh = state.mesh
    u, v = state.u.copy(), state.v.copy()
    t = state.t
    series = FunctionalSeries(mp)
    tracker = FunctionalTracker(mp, mesh) if track else None
    p = mp.p
    nonlin = mp.nonlinearity_on
    v0 = state.max_v
    threshold = stop.blowup_factor * (v0 + 1.0)
    diag = {"initial_max_ut": v0, "blowup_threshold": threshold,
            "T_10x": None, "max_support_violation": 0.0}
    r_edge = float(mesh.radius.max())
    pad = 2.0 * g.min_clearance
    cm, c0, cp = mesh.cm, mesh.c0, mesh.cp

    def snapshot():
        return FieldState(t, u.copy(), v.copy(), mesh)

    def record(st: FieldState):
        cone = cone_fn(st.t)
        viol = _violation(st, cone)
        rel = viol / st.max_u if st.max_u > 0 else 0.0
        diag["max_support_violation"] = max(diag["max_support_violation"], rel)
        row = dict(t=st.t, max_u=st.max_u, max_v=st.max_v, support_violation=rel)
        if tracker is not None:
            cur = tracker.flush()
            row.update({key: cur[key] for key in ("U", "V", "J", "A3", "A4", "A5", "NL", "lam")})
        else:
            row.update(U=np.nan, V=np.nan, J=np.nan, A3=np.nan, A4=np.nan, A5=np.nan,
                       NL=np.nan, lam=np.nan)
        series.append(**row)
        if stop.keep_states:
            series.states.append(st)
        return rel

    lo, hi = _window(mesh, cone_fn(t) + pad)
    if tracker is not None:
        tracker.push(t, u, v, lo, hi)
    record(state)
    series.V1 = series.columns["V"][0]

    schedule = _sample_schedule(stop, coeffs.s0, s_end)
    next_idx = 0
    steps = 0
    status, T_blow, reason = None, None, None
    max_ut = cur_v = v0
    cur_u = state.max_u
    while status is None:
        target = schedule[next_idx]
        max_v = cur_v if nonlin else 0.0
        dt_stable = _stable_dt(t, max_v, coeffs, g, p)
        if cur_v >= threshold and dt_stable < stop.dt_min:
            status, T_blow = "blowup", t
            break
        if dt_stable <= 0.0 or not math.isfinite(dt_stable) or dt_stable < stop.dt_min * 1e-3:
            status, reason = "aborted", "dt_underflow"
            break
        if cone_fn(t) > r_edge - g.min_clearance:
            status, reason = "aborted", "boundary_margin"
            break
        if steps >= stop.max_steps:
            status, reason = "aborted", "max_steps"
            break
        dt = min(dt_stable, target - t)
        landing = target - (t + dt) <= 1e-12 * max(1.0, target)
        lo, hi = _window(mesh, cone_fn(t + dt) + pad)
        un, vn = kernels.rk4_step(u[lo:hi], v[lo:hi], float(t), float(dt),
                                  cm[lo:hi], c0[lo:hi], cp[lo:hi],
                                  coeffs.A, coeffs.ks, coeffs.B, coeffs.W, coeffs.q,
                                  float(p), bool(nonlin))
        steps += 1
        mv = float(np.max(np.abs(vn)))
        mu_ = float(np.max(np.abs(un)))
        if not (math.isfinite(mv) and math.isfinite(mu_)):
            if cur_v >= threshold:
                status, T_blow = "blowup", t
            else:
                status, reason = "aborted", "non_finite"
            break
        u[lo:hi] = un
        v[lo:hi] = vn
        t = target if landing else t + dt
        cur_v, cur_u = mv, mu_
        max_ut = max(max_ut, mv)
        if diag["T_10x"] is None and mv >= 10.0 * v0 > 0.0:
            diag["T_10x"] = t
        if tracker is not None:
            tracker.push(t, u, v, lo, hi)
        if landing:
            rel = record(snapshot())
            if stop.check_support and rel > stop.support_tol:
                status, reason = "aborted", "support_cone"
                break
            next_idx += 1
            if next_idx >= len(schedule):
                status = "survived"
    final = snapshot()
    if series.columns["t"][-1] < t:
        record(final)
    diag["final_time"] = t
    if reason is not None:
        diag["violated_invariant"] = reason
    outcome = SolveOutcome(status, T_blow, max_ut, steps, diag, final_state=final)
    return outcome, series


def run(mp: ModelParams, g: Grid, stop: StoppingPolicy = StoppingPolicy()):
    """Integrate from t = 1 until blow-up, T_max, or an invariant violation.

    Returns ``(SolveOutcome, FunctionalSeries)``; the series is sampled every
    ``stop.sample_interval`` and at the final time.
    """
    sp = mp.spacetime
    if mp.cone_radius(stop.T_max) > float(g.mesh(mp.N).radius.max()) - g.min_clearance:
        raise ConfigError(
            f"r_max = {g.r_max:g} too small for T_max = {stop.T_max:g}; "
            f"use Grid.for_horizon")
    return _march(mp, g, stop, physical_coefficients(mp), stop.T_max,
                  lambda t: float(phi_k(t, sp)) + mp.R, stop.track_functionals)


def rescaled_run_compare(mp: ModelParams, g: Grid, T_end: float = 4.0, n_samples: int = 12):
    """Max relative discrepancy between u(., t) and v(., phi_k(t)).

    The physical equation is solved in t and the rescaled one in tau; both
    are sampled at the same physical times.  Returns ``(discrepancy,
    details)``.  Comparison stops at the earlier blow-up if either run
    blows up.
    """
    sp = mp.spacetime
    times = tuple(float(x) for x in np.linspace(1.0, T_end, n_samples + 1)[1:])
    taus = tuple(float(phi_k(t, sp)) for t in times)
    base = dict(T_max=T_end, check_support=False, track_functionals=False, keep_states=True)
    out_t, ser_t = _march(mp, g, StoppingPolicy(sample_times=times, **base),
                          physical_coefficients(mp), T_end,
                          lambda t: float(phi_k(t, sp)) + mp.R, False)
    coeffs = rescaled_coefficients(mp)
    out_tau, ser_tau = _march(mp, g, StoppingPolicy(sample_times=taus, **base),
                              coeffs, taus[-1], lambda tau: tau + mp.R, False)
    by_tau = {round(st.t, 12): st for st in ser_tau.states}
    worst = 0.0
    compared = 0
    for st in ser_t.states:
        if st.t == 1.0:
            continue
        other = by_tau.get(round(float(phi_k(st.t, sp)), 12))
        if other is None:
            break
        scale = st.max_u
        if scale > 0.0:
            worst = max(worst, float(np.max(np.abs(st.u - other.u))) / scale)
        compared += 1
    details = dict(compared=compared, status_t=out_t.status, status_tau=out_tau.status)
    return worst, details
