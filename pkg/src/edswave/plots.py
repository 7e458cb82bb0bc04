"""SVG figures: lifespan scaling, functional histories, exponent phase diagram."""
from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .exponents import ExponentQuery, p_eds  # noqa: E402
from .functionals import FunctionalSeries  # noqa: E402
from .sweep import SWEEP_COLUMNS, SweepResult  # noqa: E402
from .records import write_csv  # noqa: E402

__all__ = ["emit_plots", "plot_scaling", "plot_functionals", "plot_phase_diagram"]

# fixed metadata keeps the SVG bytes stable between runs
_SVG_META = {"Date": None, "Creator": None}
plt.rcParams["svg.hashsalt"] = "edswave"


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def plot_scaling(result: SweepResult, path):
    hits = result.blowups
    if not hits:
        raise ValueError("sweep has no blow-up records to plot")
    eps = np.array([r.eps for r in hits])
    T = np.array([r.T_blow for r in hits])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(eps, T, "o", label="measured")
    xs = np.geomspace(eps.min(), eps.max(), 50)
    if np.isfinite(result.slope):
        ax.loglog(xs, np.exp(result.intercept) * xs ** result.slope, "-",
                  label=f"fit, slope {result.slope:.3f}")
    if np.isfinite(result.bound_constant):
        ax.loglog(xs, result.bound_constant * xs ** result.theory_exponent, "--",
                  label=f"theory slope {result.theory_exponent:.3f}")
    ax.set_xlabel("eps")
    ax.set_ylabel("T_blow")
    ax.set_title(f"lifespan scaling ({result.verdict})")
    ax.legend()
    return _save(fig, path)


def plot_functionals(series: FunctionalSeries, path, cert=None):
    if len(series) == 0:
        raise ValueError("empty functional series")
    from .records import series_table
    cols, rows = series_table(series, cert)
    data = np.array(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in ("U", "V", "H", "F"):
        y = data[:, cols.index(name)]
        if np.any(np.isfinite(y)):
            ax.plot(data[:, 0], y, label=name)
    ax.set_yscale("symlog", linthresh=1e-3)
    ax.set_xlabel("t")
    ax.legend()
    return _save(fig, path)


def plot_phase_diagram(N, p, path, n=121):
    """p_eds over (k, mu) with the contour p_eds = p."""
    ks = np.linspace(0.0, 0.99, n)
    mus = np.linspace(0.0, 4.0, n)
    P = np.array([[p_eds(ExponentQuery(N, k, m)) for k in ks] for m in mus])
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.pcolormesh(ks, mus, np.minimum(P, 10.0), shading="auto")
    fig.colorbar(im, ax=ax, label="p_eds (clipped at 10)")
    ax.contour(ks, mus, P, levels=[p], colors="w")
    ax.set_xlabel("k")
    ax.set_ylabel("mu")
    ax.set_title(f"N = {N}: white curve p_eds = {p:g}")
    return _save(fig, path)


def emit_plots(obj, path, cert=None):
    """Write the figures for a sweep result or a functional series into
    directory ``path``; returns the written paths.

    A sweep gives ``scaling.svg`` and ``sweep.csv``; a series gives
    ``functionals.svg``.
    """
    path = Path(path)
    if isinstance(obj, SweepResult):
        if not obj.records:
            raise ValueError("empty sweep result")
        fig = plot_scaling(obj, path / "scaling.svg")
        table = write_csv(path / "sweep.csv", SWEEP_COLUMNS, [r.row() for r in obj.records])
        return [fig, table]
    if isinstance(obj, FunctionalSeries):
        return [plot_functionals(obj, path / "functionals.svg", cert)]
    raise TypeError(f"cannot plot {type(obj).__name__}")
