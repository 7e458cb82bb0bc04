"""Command line entry point: ``edswave <command> ...``."""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import exponents as ex
from .certificate import build_certificate, check_V_above_H, predicted_lifespan
from .config import SweepConfig, load_config
from .functionals import check_U_lower, check_V_lower, lower_bound_constants
from .model import ConfigError, ModelParams
from .records import csv_text, output_dir, run_record, series_table, write_csv, write_json
from .solver import run
from .special_functions import (
    DomainError, log_phi_radial, log_rho, phi_k, rho_log_derivative,
)

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 2, 3
EXPONENT_COLUMNS = ("k", "mu", "p_G", "p_T", "p_E", "q0", "q0_shifted", "q1", "tsutaya")


def _q0_or_none(q):
    try:
        return ex.q0(q)
    except DomainError:
        return None


def _exponent_row(N, k, mu):
    q = ex.ExponentQuery(N, k, mu)
    shifted = ex.ExponentQuery(N + mu / (1.0 - k), k, 0.0)
    return (k, mu, ex.glassey(N), ex.p_tricomi(q), ex.p_eds(q), _q0_or_none(q),
            _q0_or_none(shifted), ex.q1(q), ex.tsutaya_bound(N, q))


def cmd_exponents(args):
    if args.grid:
        rows = [_exponent_row(args.N, k, mu)
                for k in np.linspace(0.0, args.k_max, args.grid)
                for mu in np.linspace(0.0, args.mu_max, args.grid)]
        text = csv_text(EXPONENT_COLUMNS, [tuple(float(v) if v is not None else None
                                                 for v in r) for r in rows])
        if args.csv:
            write_csv(args.csv, EXPONENT_COLUMNS, rows)
        else:
            sys.stdout.write(text)
        return 0
    row = _exponent_row(args.N, args.k, args.mu)
    print(f"N = {args.N:g}, k = {args.k:g}, mu = {args.mu:g}")
    for name, value in zip(EXPONENT_COLUMNS[2:], row[2:]):
        print(f"  {name:<11} {'n/a' if value is None else f'{value:.12g}'}")
    if args.p is not None:
        b = ex.lifespan_bound(ex.ExponentQuery(args.N, args.k, args.mu), args.p)
        print(f"  p = {args.p:g}: {b.regime}, form {b.form}, exponent {b.exponent}")
    return 0


def _certificate_or_none(mp):
    if not mp.nonlinearity_on or mp.eps <= 0.0:
        return None
    try:
        return build_certificate(mp)
    except DomainError as exc:
        print(f"certificate unavailable: {exc}", file=sys.stderr)
        return None


def cmd_solve(args):
    cfg = load_config(args.config)
    if isinstance(cfg, SweepConfig):
        raise ConfigError("solve takes a single-run document (no sweep.* keys)")
    mp, grid, stop = cfg.model, cfg.grid, cfg.stop
    outcome, series = run(mp, grid, stop)
    cert = _certificate_or_none(mp)
    bounds = {}
    if stop.track_functionals and mp.eps > 0.0:
        consts = lower_bound_constants(mp)
        for name, check, key in (("U_lower", check_U_lower, "T0"), ("V_lower", check_V_lower, "T1")):
            if series.t[-1] >= consts[key]:
                bounds[name] = check(series, mp, consts)
        if cert is not None and series.t[-1] >= cert.T3_tilde:
            bounds["V_above_H"] = check_V_above_H(series, cert)
    out = output_dir(args.out)
    rec = run_record(mp, grid, stop, outcome, series if stop.track_functionals else None,
                     cert, bounds)
    write_json(out / "run.json", rec)
    cols, rows = series_table(series, cert)
    write_csv(out / "run.csv", cols, rows)
    if args.plots and stop.track_functionals:
        from .plots import emit_plots
        emit_plots(series, out, cert)
    tb = "-" if outcome.T_blow is None else f"{outcome.T_blow:.6g}"
    print(f"status {outcome.status}  T_blow {tb}  steps {outcome.step_count}  -> {out}")
    for name, rep in bounds.items():
        print(f"  {name:<10} {'pass' if rep.passed else 'FAIL'}  min ratio {rep.min_ratio:.6g}")
    return 0


def cmd_sweep(args):
    from .plots import emit_plots
    from .sweep import run_sweep
    cfg = load_config(args.config)
    if not isinstance(cfg, SweepConfig):
        raise ConfigError("sweep needs a document with sweep.eps_values")
    result = run_sweep(cfg, workers=args.workers)
    out = output_dir(args.out or cfg.output_dir)
    write_json(out / "sweep.json", result.to_dict())
    if result.blowups:
        emit_plots(result, out)
    for r in result.records:
        tb = "-" if r.T_blow is None else f"{r.T_blow:.6g}"
        print(f"eps {r.eps:<10.4g} {r.status:<9} T_blow {tb}")
    print(f"slope {result.slope:.4f} +- {result.slope_stderr:.4f}  theory "
          f"{result.theory_exponent:.4f}  bound ratio {result.max_bound_ratio:.3f}")
    if result.excluded:
        print(f"runs test excludes eps {list(result.excluded)}; "
              f"slope over the rest {result.restricted_slope:.4f}")
    print(f"verdict {result.verdict}")
    return {"pass": EXIT_PASS, "fail": EXIT_FAIL}.get(result.verdict, EXIT_INCONCLUSIVE)


def _params_from_args(args):
    if args.config:
        cfg = load_config(args.config)
        return cfg.base if isinstance(cfg, SweepConfig) else cfg.model
    return ModelParams(N=args.N, k=args.k, mu=args.mu, p=args.p, eps=args.eps, R=args.R)


def cmd_certify(args):
    mp = _params_from_args(args)
    cert = build_certificate(mp)
    if args.json:
        print(cert.to_json(indent=2, sort_keys=True))
        return 0
    for name in ("alpha", "T0", "T1", "T2_tilde", "T3_tilde", "Cfg", "kappa", "C_U", "C_V", "C2"):
        print(f"{name:<10} {getattr(cert, name):.10g}")
    for name, rep in cert.checks.items():
        print(f"{name:<12} {'pass' if rep.passed else 'FAIL'}  worst margin "
              f"{rep.worst_margin:.4g} at t = {rep.t_at_worst:.4g}, limit {rep.limit_margin:.4g}")
    try:
        bound, info = predicted_lifespan(mp, cert)
        print(f"lifespan   {bound.regime}, exponent {bound.exponent}, "
              f"estimate {info['estimate']:.4g} (C = {info['C']:.4g})")
    except DomainError as exc:
        print(f"lifespan   {exc}")
    return 0 if cert.passed else 1


def cmd_specialfns(args):
    sp = ModelParams(N=args.N, k=args.k, mu=args.mu).spacetime
    t = np.asarray(args.t, float)
    lr = log_rho(t, sp)
    rows = [(float(a), float(phi_k(a, sp)), float(b), math.exp(b), float(c))
            for a, b, c in zip(t, lr, rho_log_derivative(t, sp))]
    sys.stdout.write(csv_text(("t", "phi_k", "log_rho", "rho", "rho_log_derivative"), rows))
    if args.x:
        x = np.asarray(args.x, float)
        lp = log_phi_radial(np.abs(x), args.N)
        sys.stdout.write(csv_text(("r", "log_phi", "phi"),
                                  [(float(a), float(b), math.exp(b)) for a, b in zip(x, lp)]))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="edswave", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponents", help="critical exponents for (N, k, mu)")
    p.add_argument("--N", type=float, default=1.0)
    p.add_argument("--k", type=float, default=0.0)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--p", type=float, default=None, help="also classify this power")
    p.add_argument("--grid", type=int, default=0, help="tabulate an n x n (k, mu) grid as CSV")
    p.add_argument("--k-max", type=float, default=0.95)
    p.add_argument("--mu-max", type=float, default=3.0)
    p.add_argument("--csv", default=None, help="write the grid here instead of stdout")
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("solve", help="one run: JSON record + CSV of functionals")
    p.add_argument("config")
    p.add_argument("--out", default="edswave_out/solve")
    p.add_argument("--plots", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="lifespan sweep over eps; exit 0 pass, 2 fail, 3 inconclusive")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("certify", help="constants and condition margins of the blow-up argument")
    p.add_argument("config", nargs="?")
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--k", type=float, default=0.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--p", type=float, default=1.8)
    p.add_argument("--eps", type=float, default=0.3)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("specialfns", help="tabulate rho, rho'/rho and phi")
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--k", type=float, default=0.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--t", type=float, nargs="+", default=[1.0, 2.0, 5.0, 10.0, 50.0])
    p.add_argument("--x", type=float, nargs="*", default=[])
    p.set_defaults(func=cmd_specialfns)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
