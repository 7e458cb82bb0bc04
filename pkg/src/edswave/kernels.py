"""Hot loops of the solver: one RK4 step and the per-step reductions.

Both exist twice, as numba kernels and as plain numpy.  ``rk4_step`` and
``reductions`` at module level point at the numba versions unless numba is
missing or ``EDSWAVE_DISABLE_NUMBA`` is set; the benchmark and the tests use
the ``*_numba`` / ``*_numpy`` names directly.

The semi-discrete system is

    u' = v,   v' = A s^(-2 ks) L u - (B / s) v + W s^q |v|^p,

with L the three-point operator ``cm, c0, cp``.  The damping is integrated
exactly through the factor (s / s_n)^B inside each step, so large B / s
never limits the step size.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "rk4_step", "reductions",
    "rk4_step_numba", "rk4_step_numpy",
    "reductions_numba", "reductions_numpy",
]

_EXP_CLIP = 700.0


def _apply_numpy(cm, c0, cp, u):
    out = c0 * u
    out[1:] += cm[1:] * u[:-1]
    out[:-1] += cp[:-1] * u[1:]
    return out


def rk4_step_numpy(u, v, s, dt, cm, c0, cp, A, ks, B, W, q, p, nonlin):
    sh = s + 0.5 * dt
    s1 = s + dt
    e_h = (sh / s) ** B
    e_1 = (s1 / s) ** B

    def accel(time, uu, vv):
        a = (A * time ** (-2.0 * ks)) * _apply_numpy(cm, c0, cp, uu)
        if nonlin:
            a += (W * time ** q) * np.abs(vv) ** p
        return a

    k1w = accel(s, u, v)
    u2 = u + 0.5 * dt * v
    v2 = (v + 0.5 * dt * k1w) / e_h
    k2w = e_h * accel(sh, u2, v2)
    u3 = u + 0.5 * dt * v2
    v3 = (v + 0.5 * dt * k2w) / e_h
    k3w = e_h * accel(sh, u3, v3)
    u4 = u + dt * v3
    v4 = (v + dt * k3w) / e_1
    k4w = e_1 * accel(s1, u4, v4)
    u_new = u + (dt / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = (v + (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)) / e_1
    return u_new, v_new


def reductions_numpy(u, v, logphi, shift, w_node, w_face, inv_dx, p):
    """Integrals of u, v, |v|^p and grad u . grad against exp(logphi - shift)."""
    g = np.exp(np.minimum(logphi - shift, _EXP_CLIP))
    U = np.dot(w_node, u * g)
    V = np.dot(w_node, v * g)
    NL = np.dot(w_node, np.abs(v) ** p * g)
    # faces j = 0..n sit between nodes j-1 and j; the ghost nodes carry u = 0
    G = np.dot(w_face[1:-1], np.diff(u) * np.diff(g))
    G += w_face[0] * u[0] * g[0] + w_face[-1] * u[-1] * g[-1]
    return U, V, G * inv_dx, NL


@njit
def _accel_numba(time, uu, vv, cm, c0, cp, A, ks, W, q, p, nonlin, out):
    n = uu.shape[0]
    coef = A * time ** (-2.0 * ks)
    wq = W * time ** q
    for i in range(n):
        acc = c0[i] * uu[i]
        if i > 0:
            acc += cm[i] * uu[i - 1]
        if i < n - 1:
            acc += cp[i] * uu[i + 1]
        acc *= coef
        if nonlin:
            acc += wq * abs(vv[i]) ** p
        out[i] = acc


@njit
def rk4_step_numba(u, v, s, dt, cm, c0, cp, A, ks, B, W, q, p, nonlin):
    n = u.shape[0]
    sh = s + 0.5 * dt
    s1 = s + dt
    e_h = (sh / s) ** B
    e_1 = (s1 / s) ** B
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    us = np.empty(n)
    v2 = np.empty(n)
    v3 = np.empty(n)
    v4 = np.empty(n)
    _accel_numba(s, u, v, cm, c0, cp, A, ks, W, q, p, nonlin, k1)
    for i in range(n):
        us[i] = u[i] + 0.5 * dt * v[i]
        v2[i] = (v[i] + 0.5 * dt * k1[i]) / e_h
    _accel_numba(sh, us, v2, cm, c0, cp, A, ks, W, q, p, nonlin, k2)
    for i in range(n):
        k2[i] *= e_h
        us[i] = u[i] + 0.5 * dt * v2[i]
        v3[i] = (v[i] + 0.5 * dt * k2[i]) / e_h
    _accel_numba(sh, us, v3, cm, c0, cp, A, ks, W, q, p, nonlin, k3)
    for i in range(n):
        k3[i] *= e_h
        us[i] = u[i] + dt * v3[i]
        v4[i] = (v[i] + dt * k3[i]) / e_1
    _accel_numba(s1, us, v4, cm, c0, cp, A, ks, W, q, p, nonlin, k4)
    u_new = np.empty(n)
    v_new = np.empty(n)
    h6 = dt / 6.0
    for i in range(n):
        u_new[i] = u[i] + h6 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i])
        v_new[i] = (v[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + e_1 * k4[i])) / e_1
    return u_new, v_new


@njit
def reductions_numba(u, v, logphi, shift, w_node, w_face, inv_dx, p):
    n = u.shape[0]
    U = 0.0
    V = 0.0
    NL = 0.0
    G = 0.0
    g_prev = 0.0
    u_prev = 0.0
    for i in range(n):
        e = logphi[i] - shift
        if e > _EXP_CLIP:
            e = _EXP_CLIP
        g = np.exp(e)
        U += w_node[i] * u[i] * g
        V += w_node[i] * v[i] * g
        NL += w_node[i] * abs(v[i]) ** p * g
        if i > 0:
            G += w_face[i] * (u[i] - u_prev) * (g - g_prev)
        else:
            G += w_face[0] * u[0] * g
        g_prev = g
        u_prev = u[i]
    G += w_face[n] * u[n - 1] * g_prev
    return U, V, G * inv_dx, NL


if USE_NUMBA:
    rk4_step = rk4_step_numba
    reductions = reductions_numba
else:
    rk4_step = rk4_step_numpy
    reductions = reductions_numpy
