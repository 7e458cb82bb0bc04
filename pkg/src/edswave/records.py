"""CSV and JSON persistence with byte-stable formatting.

Floats are written with ``repr`` (shortest round-trip form), columns and
keys in a fixed order, so two runs of the same configuration produce
identical files.
"""
from __future__ import annotations

import io
import json
import math
import os
from pathlib import Path

import numpy as np

__all__ = [
    "SCHEMA_VERSION",
    "OUTPUT_DIR_ENV",
    "SERIES_COLUMNS",
    "fmt",
    "write_csv",
    "csv_text",
    "series_table",
    "run_record",
    "dump_json",
    "write_json",
    "output_dir",
]

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "EDSWAVE_OUTPUT_DIR"
SERIES_COLUMNS = ("t", "U", "V", "H", "F", "max_u", "max_v")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(csv_text(columns, rows).encode())
    return path


def series_table(series, cert=None):
    """Rows (t, U, V, H, F, max_u, max_v); H and F are NaN before T3 or
    without a certificate."""
    t = series.t
    H = np.full(t.size, np.nan)
    if cert is not None and t.size and t[-1] >= cert.T3_tilde:
        from .certificate import H_of_t
        tt, hh = H_of_t(series, cert)
        H[t >= cert.T3_tilde] = hh
    F = series.V - H
    cols = (t, series.U, series.V, H, F, series.max_u, series.max_v)
    return SERIES_COLUMNS, [tuple(float(c[i]) for c in cols) for i in range(t.size)]


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dump_json(obj).encode())
    return path


def run_record(mp, grid, stop, outcome, series=None, cert=None, bounds=None) -> dict:
    """Everything needed to audit one solver run, as a JSON-ready dict."""
    rec = {
        "schema_version": SCHEMA_VERSION,
        "model": mp.to_dict(),
        "grid": grid.to_dict(),
        "stopping": {k: getattr(stop, k) for k in
                     ("T_max", "sample_interval", "blowup_factor", "dt_min", "support_tol")},
        "outcome": outcome.to_dict(),
    }
    if series is not None:
        rec["n_samples"] = len(series)
        rec["max_weak_residual"] = float(np.max(np.abs(series.weak_residual)))
    if cert is not None:
        rec["certificate"] = cert.to_dict()
    if bounds:
        rec["bounds"] = {name: rep.to_dict() for name, rep in bounds.items()}
    return rec


def output_dir(default) -> Path:
    """``EDSWAVE_OUTPUT_DIR`` if set, else ``default``."""
    return Path(os.environ.get(OUTPUT_DIR_ENV) or default)
