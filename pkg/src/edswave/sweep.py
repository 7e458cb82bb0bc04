"""Lifespan sweeps: blow-up time against eps on a log-log scale."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import stats

from .config import SweepConfig
from .exponents import ExponentQuery, lifespan_exponent
from .model import ModelParams, Grid
from .solver import StoppingPolicy, run

__all__ = [
    "SLOPE_TOL",
    "BOUND_FACTOR",
    "SweepRecord",
    "SweepResult",
    "fit_power_law",
    "runs_test_pvalue",
    "excluded_large_eps",
    "verdict",
    "run_sweep",
    "SWEEP_COLUMNS",
]

SLOPE_TOL = 0.2       # relative tolerance on the fitted slope
BOUND_FACTOR = 1.5    # allowed excess of T over the fixed-slope fit
RUNS_ALPHA = 0.1
SWEEP_COLUMNS = ("eps", "status", "T_blow", "T_10x", "max_ut", "steps")


@dataclass(frozen=True)
class SweepRecord:
    eps: float
    status: str
    T_blow: float | None
    T_10x: float | None
    max_ut: float
    steps: int
    reason: str | None = None

    def row(self):
        return (self.eps, self.status, self.T_blow, self.T_10x, self.max_ut, self.steps)


@dataclass
class SweepResult:
    records: list
    slope: float
    slope_stderr: float
    intercept: float
    theory_exponent: float
    verdict: str                  # "pass" | "fail" | "inconclusive"
    bound_constant: float = math.nan
    max_bound_ratio: float = math.nan
    excluded: tuple = ()
    restricted_slope: float = math.nan
    notes: list = field(default_factory=list)

    @property
    def blowups(self):
        return [r for r in self.records if r.status == "blowup"]

    def to_dict(self):
        return dict(
            records=[dict(zip(SWEEP_COLUMNS, r.row())) | {"reason": r.reason} for r in self.records],
            slope=self.slope, slope_stderr=self.slope_stderr, intercept=self.intercept,
            theory_exponent=self.theory_exponent, verdict=self.verdict,
            bound_constant=self.bound_constant, max_bound_ratio=self.max_bound_ratio,
            excluded_large_eps=list(self.excluded), restricted_slope=self.restricted_slope,
            notes=list(self.notes))


def fit_power_law(eps, T):
    """Least-squares fit log T = s log eps + b; returns (s, b, stderr of s)."""
    x, y = np.log(np.asarray(eps, float)), np.log(np.asarray(T, float))
    if x.size < 2 or np.ptp(x) == 0.0:
        raise ValueError("need at least two distinct eps values to fit")
    if x.size == 2:
        s = (y[1] - y[0]) / (x[1] - x[0])
        return float(s), float(y[0] - s * x[0]), math.nan
    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.intercept), float(fit.stderr)


def runs_test_pvalue(signs) -> float:
    """One-sided exact Wald-Wolfowitz p-value for too few runs in a sign sequence."""
    signs = [s for s in signs if s != 0]
    n1 = sum(1 for s in signs if s > 0)
    n2 = len(signs) - n1
    if n1 == 0 or n2 == 0:
        return 1.0
    runs = 1 + sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))
    total = math.comb(n1 + n2, n1)

    def count(r):
        if r % 2 == 0:
            m = r // 2
            return 2 * math.comb(n1 - 1, m - 1) * math.comb(n2 - 1, m - 1)
        m = (r - 1) // 2
        return (math.comb(n1 - 1, m) * math.comb(n2 - 1, m - 1)
                + math.comb(n1 - 1, m - 1) * math.comb(n2 - 1, m))

    return sum(count(r) for r in range(2, runs + 1)) / total


def excluded_large_eps(eps, T, min_points=3, alpha=RUNS_ALPHA):
    """Drop the largest eps values while fit residuals show a systematic trend.

    Residual signs ordered by eps are tested for too few runs; while the
    test rejects, the largest remaining eps is removed.  Returns the
    excluded values (largest first) and the slope over the rest.
    """
    order = np.argsort(eps)[::-1]
    eps = np.asarray(eps, float)[order]
    T = np.asarray(T, float)[order]
    start = 0
    while eps.size - start > min_points:
        s, b, _ = fit_power_law(eps[start:], T[start:])
        resid = np.log(T[start:]) - (s * np.log(eps[start:]) + b)
        if runs_test_pvalue(np.sign(resid)) >= alpha:
            break
        start += 1
    s, _, _ = fit_power_law(eps[start:], T[start:])
    return tuple(float(e) for e in eps[:start]), s


def verdict(eps, T, theory, slope_tol=SLOPE_TOL, bound_factor=BOUND_FACTOR):
    """(verdict, slope, b, stderr, C, max ratio) for blow-up data.

    Pass needs |s - theory| <= slope_tol |theory| and every
    T_i <= bound_factor * C eps_i^theory, where C is fitted with the slope
    held at ``theory``.  Fewer than three points is inconclusive.
    """
    eps = np.asarray(eps, float)
    T = np.asarray(T, float)
    if eps.size < 3:
        return "inconclusive", math.nan, math.nan, math.nan, math.nan, math.nan
    s, b, err = fit_power_law(eps, T)
    logC = float(np.mean(np.log(T) - theory * np.log(eps)))
    C = math.exp(logC)
    ratio = float(np.max(T / (C * eps ** theory)))
    ok = abs(s - theory) <= slope_tol * abs(theory) and ratio <= bound_factor
    return ("pass" if ok else "fail"), s, b, err, C, ratio


def _run_one(args):
    base, eps, grid, stop = args
    outcome, _ = run(base.replace(eps=eps), grid, stop)
    d = outcome.diagnostics
    return SweepRecord(eps, outcome.status, outcome.T_blow, d.get("T_10x"),
                       float(outcome.max_ut), int(outcome.step_count),
                       d.get("violated_invariant"))


def run_sweep(cfg: SweepConfig, workers: int | None = None) -> SweepResult:
    """Run every eps of the sweep, fit, and judge against the theory exponent.

    Runs are independent; with ``workers > 1`` they go to a process pool.
    Results are ordered by the configured eps sequence either way.
    """
    workers = cfg.workers if workers is None else int(workers)
    jobs = [(cfg.base, e, cfg.grid, cfg.stop) for e in cfg.eps_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(j) for j in jobs]
    theory = lifespan_exponent(ExponentQuery(cfg.base.N, cfg.base.k, cfg.base.mu), cfg.base.p)
    hits = [r for r in records if r.status == "blowup"]
    eps = [r.eps for r in hits]
    T = [r.T_blow for r in hits]
    v, s, b, err, C, ratio = verdict(eps, T, theory)
    notes = []
    excluded, restricted = (), math.nan
    if len(hits) >= 3:
        excluded, restricted = excluded_large_eps(eps, T)
    else:
        notes.append(f"only {len(hits)} runs blew up before T_max = {cfg.T_max:g}")
    return SweepResult(records, s, err, b, theory, v, C, ratio, excluded, restricted, notes)
