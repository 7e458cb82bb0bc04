"""Numba switch.

Set ``EDSWAVE_DISABLE_NUMBA=1`` to force the pure-numpy kernels even when
numba is importable.  The flag is read once, at import time.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

__all__ = ["HAS_NUMBA", "USE_NUMBA", "njit"]

HAS_NUMBA = numba is not None
USE_NUMBA = HAS_NUMBA and os.environ.get(
    "EDSWAVE_DISABLE_NUMBA", "").strip().lower() not in {"1", "true", "yes", "on"}


def njit(f=None, **setting):
    """``numba.njit`` when numba is installed, identity otherwise."""
    setting.setdefault("cache", True)
    setting.setdefault("nogil", True)
    if not HAS_NUMBA:
        return f if f is not None else (lambda g: g)
    if f is None:
        return lambda g: numba.njit(g, **setting)
    return numba.njit(f, **setting)
