"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 2000 20000 200000] [--repeat 20]

Prints one line per (kernel, size) with the best-of-repeat time of each
path, their ratio, and the max difference between the two outputs.
"""
import argparse
import time

import numpy as np

from edswave import kernels
from edswave.model import Mesh
from edswave.special_functions import log_phi_radial


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def setup(n, N=1):
    dx = 1.0 / 64.0
    mesh = Mesh.build(N, dx, (n // 2 if N == 1 else n) * dx)
    r = mesh.radius
    u = np.where(r < 1.0, (1.0 - r ** 2) ** 3, 0.0)
    v = 0.5 * u
    return mesh, u, v, log_phi_radial(r, N)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[2_000, 20_000, 200_000])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--N", type=int, default=1)
    args = ap.parse_args(argv)

    print(f"{'kernel':<11}{'nodes':>9}{'numba [ms]':>13}{'numpy [ms]':>13}{'speedup':>9}{'max diff':>11}")
    for n in args.sizes:
        mesh, u, v, logphi = setup(n, args.N)
        step_args = (u, v, 2.0, 0.005, mesh.cm, mesh.c0, mesh.cp, 1.0, 0.0, 1.0, 1.0, 0.0, 1.8, True)
        red_args = (u, v, logphi, 2.0, mesh.w_node, mesh.w_face, 1.0 / mesh.dx, 1.8)
        for name, fast, slow, fargs in (
                ("rk4_step", kernels.rk4_step_numba, kernels.rk4_step_numpy, step_args),
                ("reductions", kernels.reductions_numba, kernels.reductions_numpy, red_args)):
            fast(*fargs)  # compile outside the timing
            a = np.concatenate([np.atleast_1d(x) for x in fast(*fargs)])
            b = np.concatenate([np.atleast_1d(x) for x in slow(*fargs)])
            diff = float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))
            tf = best_time(lambda: fast(*fargs), args.repeat)
            ts = best_time(lambda: slow(*fargs), args.repeat)
            print(f"{name:<11}{mesh.size:>9}{tf * 1e3:>13.4f}{ts * 1e3:>13.4f}{ts / tf:>9.2f}{diff:>11.2e}")


if __name__ == "__main__":
    main()
