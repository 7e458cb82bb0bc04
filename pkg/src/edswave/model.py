"""Problem instance, spatial grid and field snapshots shared by the solver
and the post-processing modules."""
from __future__ import annotations

from dataclasses import dataclass, field, replace, asdict
from functools import cached_property
import math

import numpy as np

from .special_functions import SpacetimeParams, phi_k, sphere_area

__all__ = [
    "ConfigError",
    "PROFILES",
    "ModelParams",
    "Grid",
    "Mesh",
    "FieldState",
]


class ConfigError(ValueError):
    """Invalid problem or grid configuration."""


def _bump(power):
    def profile(s):
        s = np.asarray(s, dtype=float)
        return np.where(s < 1.0, np.clip(1.0 - s * s, 0.0, None) ** power, 0.0)
    return profile


def _zero(s):
    return np.zeros_like(np.asarray(s, dtype=float))


# radial profiles of s = |x| / R, nonnegative and supported in s <= 1
PROFILES = {
    "bump": _bump(3),        # (1 - s^2)^3, C^2 at the edge of the support
    "bump4": _bump(4),
    "zero": _zero,
}


@dataclass(frozen=True)
class ModelParams:
    N: int = 1
    k: float = 0.0
    mu: float = 1.0
    p: float = 2.0
    eps: float = 0.1
    R: float = 1.0
    f_profile: str = "bump"
    g_profile: str = "bump"
    nonlinearity_on: bool = True

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if not (math.isfinite(self.k) and self.k < 1.0):
            raise ConfigError(f"k must lie in [0,1), got {self.k!r}")
        if not (math.isfinite(self.mu) and self.mu >= 0.0):
            raise ConfigError(f"mu must be >= 0, got {self.mu!r}")
        if not (math.isfinite(self.p) and self.p > 1.0):
            raise ConfigError(f"p must be > 1, got {self.p!r}")
        if not (math.isfinite(self.eps) and self.eps >= 0.0):
            raise ConfigError(f"eps must be >= 0, got {self.eps!r}")
        if not (math.isfinite(self.R) and self.R > 0.0):
            raise ConfigError(f"R must be > 0, got {self.R!r}")
        for name in (self.f_profile, self.g_profile):
            if name not in PROFILES:
                raise ConfigError(f"unknown profile {name!r}; known: {sorted(PROFILES)}")

    @property
    def spacetime(self) -> SpacetimeParams:
        return SpacetimeParams(self.k, self.mu)

    def f(self, r):
        return PROFILES[self.f_profile](np.abs(r) / self.R)

    def g(self, r):
        return PROFILES[self.g_profile](np.abs(r) / self.R)

    def cone_radius(self, t):
        """Support bound phi_k(t) + R."""
        return phi_k(t, self.spacetime) + self.R

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Mesh:
    """Nodes and finite-volume weights of a grid in a given dimension.

    For N = 1 the nodes cover [-r_max, r_max]; for N >= 2 they are radii
    r_i = i dx.  ``w_face`` has one entry per face j = 0..n, face j sitting
    between nodes j-1 and j (nodes -1 and n are zero ghosts).  The operator
    ``L u_i = (w_face[i+1] (u_{i+1} - u_i) - w_face[i] (u_i - u_{i-1}))
    / (w_node[i] dx)`` is the conservative radial Laplacian; at r = 0 it
    reduces to 2 N (u_1 - u_0) / dx^2.
    """

    N: int
    dx: float
    x: np.ndarray
    radius: np.ndarray
    w_node: np.ndarray
    w_face: np.ndarray
    cm: np.ndarray
    c0: np.ndarray
    cp: np.ndarray

    @classmethod
    def build(cls, N, dx, r_max):
        m = int(math.ceil(r_max / dx - 1e-9))
        if N == 1:
            idx = np.arange(-m, m + 1, dtype=float)
            x = idx * dx
            radius = np.abs(x)
            w_node = np.full(x.size, dx)
            w_face = np.ones(x.size + 1)
        else:
            idx = np.arange(0, m + 1, dtype=float)
            x = idx * dx
            radius = x
            area = sphere_area(N)
            outer = (idx + 0.5) * dx
            inner = np.maximum(idx - 0.5, 0.0) * dx
            w_node = area * (outer ** N - inner ** N) / N
            faces = np.concatenate(([0.0], (idx + 0.5) * dx))
            w_face = area * faces ** (N - 1)
            w_face[0] = 0.0
        cm = w_face[:-1] / (w_node * dx)
        cp = w_face[1:] / (w_node * dx)
        c0 = -(cm + cp)
        for arr in (x, radius, w_node, w_face, cm, c0, cp):
            arr.setflags(write=False)
        return cls(N, dx, x, radius, w_node, w_face, cm, c0, cp)

    @property
    def size(self):
        return self.x.size

    def integrate(self, values):
        """Node quadrature of a radial/1D field over R^N."""
        return float(np.dot(self.w_node, values))

    def laplacian(self, u):
        out = self.c0 * u
        out[1:] += self.cm[1:] * u[:-1]
        out[:-1] += self.cp[:-1] * u[1:]
        return out


@dataclass(frozen=True)
class Grid:
    dx: float
    r_max: float
    cfl_safety: float = 0.4
    boundary: str = "truncated_with_margin"

    def __post_init__(self):
        if not (math.isfinite(self.dx) and self.dx > 0.0):
            raise ConfigError(f"dx must be > 0, got {self.dx!r}")
        if not (math.isfinite(self.r_max) and self.r_max > self.dx):
            raise ConfigError(f"r_max must exceed dx, got {self.r_max!r}")
        if not 0.0 < self.cfl_safety < 1.0:
            raise ConfigError(f"cfl_safety must lie in (0,1), got {self.cfl_safety!r}")
        if self.boundary != "truncated_with_margin":
            raise ConfigError(f"unsupported boundary {self.boundary!r}")

    # stencil reach of one RK4 step, in cells
    STENCIL_CELLS = 4

    @classmethod
    def for_horizon(cls, mp: ModelParams, T_max: float, dx: float | None = None,
                    cfl_safety: float = 0.4, margin_cells: int = 40) -> "Grid":
        """Grid whose edge stays ``margin_cells`` beyond the cone at T_max."""
        dx = mp.R / 64.0 if dx is None else float(dx)
        reach = float(mp.cone_radius(T_max)) + margin_cells * dx
        r_max = math.ceil(reach / dx) * dx
        return cls(dx=dx, r_max=r_max, cfl_safety=cfl_safety)

    def mesh(self, N: int) -> Mesh:
        return _mesh_cache(N, self.dx, self.r_max)

    @property
    def min_clearance(self):
        """Closest the support cone may come to the grid edge."""
        return 5 * self.STENCIL_CELLS * self.dx

    def to_dict(self):
        return asdict(self)


_MESHES = {}


def _mesh_cache(N, dx, r_max):
    key = (N, dx, r_max)
    mesh = _MESHES.get(key)
    if mesh is None:
        if len(_MESHES) > 32:
            _MESHES.clear()
        mesh = _MESHES[key] = Mesh.build(N, dx, r_max)
    return mesh


@dataclass(frozen=True)
class FieldState:
    """(u, u_t) on a mesh at time t.  Arrays are treated as immutable."""

    t: float
    u: np.ndarray
    v: np.ndarray
    mesh: Mesh = field(repr=False)

    @cached_property
    def max_u(self):
        return float(np.max(np.abs(self.u)))

    @cached_property
    def max_v(self):
        return float(np.max(np.abs(self.v)))
