"""Flat ``section.key = value`` configuration documents.

One assignment per line; ``#`` starts a comment.  Values are JSON literals
(numbers, ``true``/``false``, ``null``, quoted strings, lists); anything
else is taken as a bare string.  Unknown keys are rejected.  Example::

    model.k = 0.5
    model.p = 2
    run.T_max = 200
    sweep.eps_values = [0.2, 0.1, 0.05, 0.03, 0.02]
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
from pathlib import Path

from .exponents import ExponentQuery, p_eds
from .model import ConfigError, Grid, ModelParams
from .solver import StoppingPolicy

__all__ = ["RunConfig", "SweepConfig", "parse_config", "load_config", "KNOWN_KEYS"]

KNOWN_KEYS = {
    "model": ("N", "k", "mu", "p", "eps", "R", "f_profile", "g_profile", "nonlinearity_on"),
    "grid": ("dx", "cfl_safety", "margin_cells"),
    "run": ("T_max", "sample_interval", "blowup_factor", "dt_min", "check_support",
            "track_functionals"),
    "sweep": ("eps_values", "workers", "output_dir"),
}

_TYPES = {
    "N": int, "f_profile": str, "g_profile": str, "nonlinearity_on": bool,
    "margin_cells": int, "check_support": bool, "track_functionals": bool,
    "workers": int, "output_dir": str, "eps_values": list,
}


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    grid: Grid
    stop: StoppingPolicy


@dataclass(frozen=True)
class SweepConfig:
    base: ModelParams
    eps_values: tuple
    grid: Grid
    T_max: float
    output_dir: str = "sweep_out"
    workers: int = 1
    stop: StoppingPolicy = field(default=None)

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_values)
        object.__setattr__(self, "eps_values", eps)
        if len(set(eps)) != len(eps):
            raise ConfigError(f"eps values must be distinct, got {list(eps)}")
        if any(not (e > 0.0 and math.isfinite(e)) for e in eps):
            raise ConfigError(f"eps values must be positive, got {list(eps)}")
        if len(eps) < 5:
            raise ConfigError(f"eps values: a sweep needs at least 5, got {len(eps)}")
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise ConfigError(f"eps values must be decreasing, got {list(eps)}")
        if eps[0] / eps[-1] < 10.0 * (1.0 - 1e-12):
            raise ConfigError(f"eps values must span a decade, got {eps[0]:g}..{eps[-1]:g}")
        pc = p_eds(ExponentQuery(self.base.N, self.base.k, self.base.mu))
        if not self.base.p < pc:
            raise ConfigError(f"lifespan sweeps need p < p_eds = {pc:g}, got p = {self.base.p:g}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.stop is None:
            object.__setattr__(self, "stop", StoppingPolicy(
                T_max=self.T_max, sample_interval=max(1.0, self.T_max / 400.0),
                track_functionals=False))


def _value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _coerce(key, value, lineno):
    want = _TYPES.get(key, float)
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"line {lineno}: {key} must be a number, got {value!r}")
        return float(value)
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"line {lineno}: {key} must be an integer, got {value!r}")
        return value
    if not isinstance(value, want):
        raise ConfigError(f"line {lineno}: {key} must be {want.__name__}, got {value!r}")
    return value


def _read(text):
    out = {}
    lines = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        name, raw = (s.strip() for s in line.split("=", 1))
        section, _, key = name.partition(".")
        if not key or section not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown section in {name!r}; "
                              f"known: {sorted(KNOWN_KEYS)}")
        if key not in KNOWN_KEYS[section]:
            raise ConfigError(f"line {lineno}: unknown key {name!r}")
        if name in out:
            raise ConfigError(f"line {lineno}: {name!r} set twice (first on line {lines[name]})")
        value = _value(raw)
        if not (key == "dx" and value is None):
            value = _coerce(key, value, lineno)
        out[name] = value
        lines[name] = lineno
    return out, lines


def _section(values, section):
    prefix = section + "."
    return {k[len(prefix):]: v for k, v in values.items() if k.startswith(prefix)}


def _anchored(lines, section, build):
    """Call build(); tag a ConfigError with the line of the offending key."""
    try:
        return build()
    except (ConfigError, TypeError) as exc:
        msg = str(exc)
        first = msg.split(" ", 1)[0]
        where = [n for n in lines if n.startswith(section + ".")
                 and (n.split(".", 1)[1] == first or n.split(".", 1)[1].startswith(first + "_"))]
        tag = f"line {lines[where[0]]}: " if where else ""
        raise ConfigError(f"{tag}{msg}") from None


def parse_config(text: str):
    """Parse a document into a :class:`SweepConfig` (when any ``sweep.`` key is
    present) or a :class:`RunConfig`.  Defaults fill every missing key."""
    values, lines = _read(text)
    model = _anchored(lines, "model", lambda: ModelParams(**_section(values, "model")))
    run = _section(values, "run")
    sweep = _section(values, "sweep")
    T_max = run.get("T_max", 50.0)
    if sweep:
        if "eps_values" not in sweep:
            raise ConfigError("sweep.eps_values is required in a sweep document")
        run.setdefault("track_functionals", False)
        run.setdefault("sample_interval", max(1.0, T_max / 400.0))
    stop = _anchored(lines, "run", lambda: StoppingPolicy(**run))
    grid_opts = _section(values, "grid")
    grid = _anchored(lines, "grid", lambda: Grid.for_horizon(
        model, T_max, dx=grid_opts.get("dx"), cfl_safety=grid_opts.get("cfl_safety", 0.4),
        margin_cells=grid_opts.get("margin_cells", 40)))
    if sweep:
        return _anchored(lines, "sweep", lambda: SweepConfig(
            model, tuple(sweep["eps_values"]), grid, T_max,
            output_dir=sweep.get("output_dir", "sweep_out"),
            workers=sweep.get("workers", 1), stop=stop))
    return RunConfig(model, grid, stop)


def load_config(path):
    return parse_config(Path(path).read_text())
