"""Multiplier functions of the test-function method.

Everything here is built on the integral representation

    K_nu(z) = int_0^inf exp(-z cosh s) cosh(nu s) ds,

evaluated by composite Gauss-Legendre quadrature on a truncated interval.
The quadrature works on the scaled integrand exp(-z (cosh s - 1)), so the
natural output is ``log K_nu(z)``; the plain values are exponentials of it
and underflow to zero once z exceeds roughly 745.  Callers that need the
time weight rho(t) at late times should use :func:`log_rho`.

All functions are pure and vectorised over their real arguments.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.special import gammaln

__all__ = [
    "AccuracyError",
    "DomainError",
    "EvalControls",
    "SpacetimeParams",
    "DEFAULT_CONTROLS",
    "bessel_k",
    "bessel_k_dz",
    "bessel_k_ratio",
    "log_bessel_k",
    "log_bessel_k_scaled",
    "phi_k",
    "rho",
    "log_rho",
    "log_rho_scaled",
    "rho_log_derivative",
    "rho_ode_residual",
    "phi_spatial",
    "phi_radial",
    "log_phi_radial",
    "psi",
    "log_psi",
    "sphere_area",
]

_GL_ORDER = 16
# log of the integrand decay accepted at the truncation point
_TAIL_LOG = 45.0


class DomainError(ValueError):
    """Argument outside the domain of the requested function."""


class AccuracyError(RuntimeError):
    """Quadrature did not converge; ``best`` holds the last estimate."""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class EvalControls:
    quad_rel_tol: float = 1e-10
    quad_max_nodes: int = 4096
    fd_step: float | None = None  # None: 1e-5 * max(1, t)

    def __post_init__(self):
        if not 0.0 < self.quad_rel_tol < 1.0:
            raise DomainError("quad_rel_tol must lie in (0, 1)")
        if self.quad_max_nodes < 2 * _GL_ORDER:
            raise DomainError(f"quad_max_nodes must be at least {2 * _GL_ORDER}")
        if self.fd_step is not None and not self.fd_step > 0.0:
            raise DomainError("fd_step must be positive")

    def step_at(self, t):
        if self.fd_step is not None:
            return self.fd_step
        return 1e-5 * max(1.0, abs(float(t)))


DEFAULT_CONTROLS = EvalControls()


@dataclass(frozen=True)
class SpacetimeParams:
    """Speed exponent ``k`` (c(t) = t^-k) and damping strength ``mu``."""

    k: float
    mu: float

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k < 1.0):
            raise DomainError(f"k must be finite and < 1, got {self.k!r}")
        if not (math.isfinite(self.mu) and self.mu >= 0.0):
            raise DomainError(f"mu must be finite and >= 0, got {self.mu!r}")

    @property
    def nu(self) -> float:
        """Order (mu - 1) / (2 (1 - k)) of the Bessel factor in rho."""
        return (self.mu - 1.0) / (2.0 * (1.0 - self.k))


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _composite_nodes(upper, panels):
    """Nodes/weights of ``panels`` equal GL panels on [0, upper] per row."""
    x, w = _gauss_legendre(_GL_ORDER)
    edges = np.arange(panels, dtype=float)
    unit = ((edges[:, None] + 0.5 * (x[None, :] + 1.0)) / panels).ravel()
    unit_w = np.tile(w, panels) / (2.0 * panels)
    return upper[:, None] * unit[None, :], upper[:, None] * unit_w[None, :]


def _adaptive(log_integrand, upper, ctl, what):
    """Log of the integral of exp(log_integrand) over [0, upper], rowwise.

    ``log_integrand(s)`` receives a (rows, nodes) array.  The returned log
    includes the row-wise shift used to keep the exponentials finite.
    """
    panels = 2
    previous = None
    change = math.inf
    while True:
        s, w = _composite_nodes(upper, panels)
        g = log_integrand(s)
        shift = g.max(axis=1)
        total = np.sum(w * np.exp(g - shift[:, None]), axis=1)
        current = shift + np.log(total)
        if previous is not None:
            change = np.max(np.abs(np.expm1(current - previous)))
            if change <= ctl.quad_rel_tol:
                return current
        previous = current
        panels *= 2
        if panels * _GL_ORDER > ctl.quad_max_nodes:
            raise AccuracyError(
                f"{what}: quadrature not converged within {ctl.quad_max_nodes} nodes "
                f"(last relative change {change:.3e})",
                best=current,
            )


def _bessel_truncation(anu, z):
    """Upper limit s_max with h(s_max) <= max h - _TAIL_LOG.

    h(s) = |nu| s - z (cosh s - 1) is concave with its peak at asinh(|nu|/z),
    so Newton iterates started right of the peak approach the cut point from
    the right and never truncate too early.
    """
    peak = np.arcsinh(anu / z)
    target = anu * peak - z * (np.cosh(peak) - 1.0) - _TAIL_LOG
    s = peak + np.sqrt(2.0 * _TAIL_LOG / (z * np.cosh(peak))) + 1e-3
    for _ in range(100):
        f = anu * s - z * (np.cosh(s) - 1.0) - target
        step = f / (anu - z * np.sinh(s))
        s = s - step
        if np.all(np.abs(step) <= 1e-12 * s):
            break
    return s


def log_bessel_k_scaled(nu, z, ctl: EvalControls = DEFAULT_CONTROLS):
    """log(exp(z) K_nu(z)) for real ``nu`` and ``z > 0``."""
    z_arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z_arr)) or np.any(z_arr <= 0.0):
        raise DomainError("bessel_k requires finite z > 0")
    if not math.isfinite(nu):
        raise DomainError("bessel_k requires a finite order")
    anu = abs(float(nu))
    flat = np.atleast_1d(z_arr).ravel()
    upper = _bessel_truncation(np.full_like(flat, anu), flat)
    zz = flat[:, None]

    def log_integrand(s):
        # log cosh(anu s) written to avoid overflow for large anu * s
        a = anu * s
        return -zz * (np.cosh(s) - 1.0) + a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)

    out = _adaptive(log_integrand, upper, ctl, "bessel_k")
    return out.reshape(z_arr.shape) if z_arr.ndim else float(out[0])


def log_bessel_k(nu, z, ctl: EvalControls = DEFAULT_CONTROLS):
    """Natural log of K_nu(z)."""
    return log_bessel_k_scaled(nu, z, ctl) - np.asarray(z, dtype=float)


def bessel_k(nu, z, ctl: EvalControls = DEFAULT_CONTROLS):
    """Modified Bessel function of the second kind from its integral form."""
    return np.exp(log_bessel_k(nu, z, ctl))


def bessel_k_ratio(nu, z, ctl: EvalControls = DEFAULT_CONTROLS):
    """K_{nu+1}(z) / K_nu(z), computed without forming either factor."""
    return np.exp(log_bessel_k_scaled(nu + 1.0, z, ctl) - log_bessel_k_scaled(nu, z, ctl))


def bessel_k_dz(nu, z, ctl: EvalControls = DEFAULT_CONTROLS):
    """dK_nu/dz = -K_{nu+1}(z) + (nu / z) K_nu(z)."""
    z_arr = np.asarray(z, dtype=float)
    k_nu = bessel_k(nu, z_arr, ctl)
    return k_nu * (nu / z_arr - bessel_k_ratio(nu, z_arr, ctl))


def _check_t(t):
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)) or np.any(t_arr < 1.0):
        raise DomainError("time arguments must satisfy t >= 1")
    return t_arr


def phi_k(t, params: SpacetimeParams):
    """Cone radius growth t^(1-k) / (1-k); the rescaled time variable."""
    if not params.k < 1.0:
        raise DomainError("phi_k needs k < 1")
    t_arr = _check_t(t)
    return t_arr ** (1.0 - params.k) / (1.0 - params.k)


def log_rho(t, params: SpacetimeParams, ctl: EvalControls = DEFAULT_CONTROLS):
    """log of rho(t) = t^((1+mu)/2) K_nu(phi_k(t)); finite for every t >= 1."""
    t_arr = _check_t(t)
    return 0.5 * (1.0 + params.mu) * np.log(t_arr) + log_bessel_k(
        params.nu, phi_k(t_arr, params), ctl)


def log_rho_scaled(t, params: SpacetimeParams, ctl: EvalControls = DEFAULT_CONTROLS):
    """log(rho(t) exp(phi_k(t))); grows only like a power of t."""
    t_arr = _check_t(t)
    z = phi_k(t_arr, params)
    return 0.5 * (1.0 + params.mu) * np.log(t_arr) + log_bessel_k_scaled(params.nu, z, ctl)


def rho(t, params: SpacetimeParams, ctl: EvalControls = DEFAULT_CONTROLS):
    """Time factor of the test function; positive, underflows past phi_k ~ 745."""
    return np.exp(log_rho(t, params, ctl))


def rho_log_derivative(t, params: SpacetimeParams, ctl: EvalControls = DEFAULT_CONTROLS):
    """rho'(t) / rho(t) = mu/t - t^-k K_{nu+1}(phi_k) / K_nu(phi_k)."""
    t_arr = _check_t(t)
    ratio = bessel_k_ratio(params.nu, phi_k(t_arr, params), ctl)
    return params.mu / t_arr - t_arr ** (-params.k) * ratio


def sphere_area(dim_embedding):
    """Area of the unit sphere S^(n-1) in R^n; ``sphere_area(1) == 2``."""
    n = float(dim_embedding)
    return 2.0 * math.pi ** (n / 2.0) / math.exp(gammaln(n / 2.0))


def log_phi_radial(r, N: int, ctl: EvalControls = DEFAULT_CONTROLS):
    """log of the radial profile of phi, for r = |x| >= 0.

    N = 1 gives log(2 cosh r).  For N >= 2 the sphere integral reduces to
    |S^(N-2)| int_0^pi exp(r cos th) sin^(N-2) th dth.
    """
    if int(N) != N or N < 1:
        raise DomainError(f"dimension must be a positive integer, got {N!r}")
    r_arr = np.abs(np.asarray(r, dtype=float))
    if N == 1:
        return r_arr + np.log1p(np.exp(-2.0 * r_arr))
    flat = np.atleast_1d(r_arr).ravel()
    # exp(-r (1 - cos th)) drops below e^-(60 + 2N) past this angle
    cut = 1.0 - (60.0 + 2.0 * N) / np.maximum(flat, 1e-300)
    upper = np.where(cut > -1.0, np.arccos(np.clip(cut, -1.0, 1.0)), math.pi)
    rr = flat[:, None]
    m = N - 2

    def log_integrand(th):
        g = -rr * (1.0 - np.cos(th))
        if m:
            g = g + m * np.log(np.sin(th))
        return g

    log_int = _adaptive(log_integrand, upper, ctl, "phi_spatial")
    out = math.log(sphere_area(N - 1)) + flat + log_int
    return out.reshape(r_arr.shape) if r_arr.ndim else float(out[0])


def phi_radial(r, N: int, ctl: EvalControls = DEFAULT_CONTROLS):
    return np.exp(log_phi_radial(r, N, ctl))


def _radius(x, N):
    x_arr = np.asarray(x, dtype=float)
    if N == 1 and (x_arr.ndim == 0 or x_arr.shape[-1] != 1):
        return np.abs(x_arr)
    if x_arr.shape[-1:] != (N,):
        raise DomainError(f"points must have trailing dimension {N}")
    return np.sqrt(np.sum(x_arr * x_arr, axis=-1))


def phi_spatial(x, N: int, ctl: EvalControls = DEFAULT_CONTROLS):
    """Spatial factor phi(x) = int_{S^(N-1)} exp(x . w) dw, with Delta phi = phi.

    ``x`` is an array of points with trailing axis of length N; for N = 1 a
    plain array of coordinates is accepted too.
    """
    if int(N) != N or N < 1:
        raise DomainError(f"dimension must be a positive integer, got {N!r}")
    return phi_radial(_radius(x, N), N, ctl)


def log_psi(x, t, params: SpacetimeParams, N: int, ctl: EvalControls = DEFAULT_CONTROLS):
    if int(N) != N or N < 1:
        raise DomainError(f"dimension must be a positive integer, got {N!r}")
    return log_phi_radial(_radius(x, N), N, ctl) + log_rho(t, params, ctl)


def psi(x, t, params: SpacetimeParams, N: int, ctl: EvalControls = DEFAULT_CONTROLS):
    """psi(x, t) = phi(x) rho(t), the positive solution of the adjoint equation."""
    return np.exp(log_psi(x, t, params, N, ctl))


def rho_ode_residual(t, params: SpacetimeParams, h=None, ctl: EvalControls = DEFAULT_CONTROLS):
    """Relative defect of rho'' - t^-2k rho - (mu rho / t)' = 0 with centred
    differences of step ``h`` (default ``ctl.step_at(t)``).

    Uses t - h >= 1, so t must exceed 1 + h.
    """
    t = float(t)
    h = ctl.step_at(t) if h is None else float(h)
    if t - h < 1.0:
        raise DomainError("rho_ode_residual needs t - h >= 1")
    # work relative to rho(t) to stay clear of underflow
    lr0 = float(log_rho(t, params, ctl))
    tm, tp = t - h, t + h
    r = np.exp(log_rho(np.array([tm, t, tp]), params, ctl) - lr0)
    d2 = (r[2] - 2.0 * r[1] + r[0]) / (h * h)
    drift = (params.mu * (r[2] / tp - r[0] / tm)) / (2.0 * h)
    return abs(d2 - t ** (-2.0 * params.k) * r[1] - drift) / abs(d2)
