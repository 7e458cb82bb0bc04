"""Critical exponents for the damped wave equation in expanding spacetime.

All functions are pure.  Degenerate denominators give ``math.inf`` rather
than an overflow or an exception, so callers branch on it explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

from .special_functions import DomainError

__all__ = [
    "ExponentQuery",
    "LifespanBound",
    "CRITICAL_TOL",
    "glassey",
    "p_tricomi",
    "p_eds",
    "q0",
    "q1",
    "tsutaya_bound",
    "candidate_power",
    "effective_dimension",
    "weight_exponent",
    "lifespan_exponent",
    "lifespan_bound",
]

# |p - p_eds| below this counts as the critical case
CRITICAL_TOL = 1e-12


@dataclass(frozen=True)
class ExponentQuery:
    """Space dimension and spacetime parameters.

    ``N`` may be a non-integer real when an effective dimension such as
    N + mu / (1 - k) is wanted.
    """

    N: float
    k: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.N) and self.N >= 1.0):
            raise DomainError(f"N must be >= 1, got {self.N!r}")
        if not (math.isfinite(self.k) and 0.0 <= self.k < 1.0):
            raise DomainError(f"k must lie in [0,1), got {self.k!r}")
        if not (math.isfinite(self.mu) and self.mu >= 0.0):
            raise DomainError(f"mu must be >= 0, got {self.mu!r}")


def _one_plus(num, den):
    return math.inf if den == 0.0 else 1.0 + num / den


def glassey(N) -> float:
    """1 + 2 / (N - 1); infinite for N = 1."""
    if not N >= 1:
        raise DomainError(f"N must be >= 1, got {N!r}")
    return _one_plus(2.0, N - 1.0)


def effective_dimension(q: ExponentQuery) -> float:
    """(1 - k)(N - 1) + k + mu, the quantity that sets the critical power."""
    return (1.0 - q.k) * (q.N - 1.0) + q.k + q.mu


def p_tricomi(q: ExponentQuery) -> float:
    return _one_plus(2.0, (1.0 - q.k) * (q.N - 1.0) + q.k)


def p_eds(q: ExponentQuery) -> float:
    return _one_plus(2.0, effective_dimension(q))


def q0(q: ExponentQuery) -> float:
    """Positive root of ((1-k)N - 1) x^2 - ((1-k)N + 1 + 2k) x - 2(1-k) = 0.

    Only N and k enter; pass N + mu / (1 - k) as the dimension for the
    shifted variant.  With a vanishing leading coefficient the equation is
    linear and its root is returned.
    """
    a = (1.0 - q.k) * q.N - 1.0
    b = -((1.0 - q.k) * q.N + 1.0 + 2.0 * q.k)
    c = -2.0 * (1.0 - q.k)
    if a == 0.0:
        root = -c / b
        if root > 0.0:
            return root
        raise DomainError(f"linear q0 equation has no positive root ({root!r})")
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise DomainError(f"q0 equation has complex roots (discriminant {disc!r})")
    sq = math.sqrt(disc)
    # cancellation-free pair of roots
    w = -0.5 * (b - sq if b < 0.0 else b + sq)
    roots = sorted((w / a, c / w))
    if roots[1] > 0.0:
        return roots[1]
    raise DomainError(f"q0 equation has no positive root: roots {roots}")


def q1(q: ExponentQuery) -> float:
    return 1.0 + 2.0 / (q.N * (1.0 - q.k))


def candidate_power(q: ExponentQuery) -> float:
    """max(q0 at dimension N + mu / (1 - k), q1).  No blow-up claim is attached."""
    shifted = ExponentQuery(q.N + q.mu / (1.0 - q.k), q.k, 0.0)
    return max(q0(shifted), q1(q))


def tsutaya_bound(n, q: ExponentQuery):
    """1 + 1 / ((1-k) n + mu) inside the window (n+1)/(n+2) < k < 1,
    0 <= mu < (n+2) k - (n+1); ``None`` outside it."""
    if not n > 0:
        raise DomainError(f"n must be positive, got {n!r}")
    if not ((n + 1.0) / (n + 2.0) < q.k < 1.0):
        return None
    if not (0.0 <= q.mu < (n + 2.0) * q.k - (n + 1.0)):
        return None
    return 1.0 + 1.0 / ((1.0 - q.k) * n + q.mu)


def weight_exponent(q: ExponentQuery, p: float) -> float:
    """a = ((N-1)(1-k) + k + mu)(p-1) / 2, the power of t in the ODE lower bound."""
    return effective_dimension(q) * (p - 1.0) / 2.0


def lifespan_exponent(q: ExponentQuery, p: float) -> float:
    """-2(p-1) / (2 - ((1-k)(N-1) + k + mu)(p-1)), the power of eps."""
    return -2.0 * (p - 1.0) / (2.0 - effective_dimension(q) * (p - 1.0))


@dataclass(frozen=True)
class LifespanBound:
    """Shape of the lifespan upper bound.

    subcritical: T <= C eps^exponent; critical: T <= exp(C eps^-(p-1))
    (``rate`` holds -(p-1)); supercritical: no bound is claimed.
    """

    regime: str
    exponent: float | None
    form: str
    rate: float | None = None

    def __post_init__(self):
        if self.regime == "subcritical":
            assert self.form == "power" and self.exponent is not None and self.exponent < 0
        elif self.regime == "critical":
            assert self.form == "exponential"
        else:
            assert self.regime == "supercritical" and self.form == "none"


def lifespan_bound(q: ExponentQuery, p: float, eps: float = 1.0) -> LifespanBound:
    """Regime and form of the lifespan bound for power p.

    ``eps`` only has to be positive; the form does not depend on it.
    """
    if not p > 1.0:
        raise DomainError(f"p must be > 1, got {p!r}")
    if not eps > 0.0:
        raise DomainError(f"eps must be > 0, got {eps!r}")
    pc = p_eds(q)
    if abs(p - pc) <= CRITICAL_TOL:
        return LifespanBound("critical", None, "exponential", -(p - 1.0))
    if p < pc:
        return LifespanBound("subcritical", lifespan_exponent(q, p), "power")
    return LifespanBound("supercritical", None, "none")
