#!/usr/bin/env python3
"""Grid-refinement study for the log-extracted Poisson solver.

Solves the two manufactured cases (radial zero-mass and mode-2) plus the
Gaussian log-coefficient problem over a sequence of radial resolutions and
prints the observed errors and convergence orders.
"""

import argparse
import time

import numpy as np

from constraints2d.elliptic import poisson_solve
from constraints2d.fields import ScalarField, build_grid


def run(case, K, N, R_max, delta):
    g = build_grid(K, N, R_max, delta)
    r = g.r
    if case == "radial":
        rhs = ScalarField.from_mode(g, 0, "cos", (4 * r**2 - 4) * np.exp(-r**2))
        exact = np.exp(-r**2)
        sel = 0
    elif case == "mode2":
        rhs = ScalarField.from_mode(g, 2, "cos", (4 * r**4 - 12 * r**2) * np.exp(-r**2))
        exact = r**2 * np.exp(-r**2)
        sel = 2
    else:  # log coefficient
        rhs = ScalarField.from_mode(g, 0, "cos", np.exp(-r**2))
        t0 = time.perf_counter()
        sol = poisson_solve(rhs)
        return abs(sol.c_log - 0.5), time.perf_counter() - t0
    t0 = time.perf_counter()
    sol = poisson_solve(rhs)
    return np.max(np.abs(sol.v.a[sel] - exact)), time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--R-max", type=float, default=60.0)
    ap.add_argument("--delta", type=float, default=-0.5)
    ap.add_argument("--resolutions", default="128,256,512,1024,2048")
    args = ap.parse_args()
    res = [int(n) for n in args.resolutions.split(",")]

    for case in ("radial", "mode2", "logcoeff"):
        print(f"\n== {case} ==")
        print(f"{'N_r':>6} {'error':>12} {'order':>7} {'time[s]':>8}")
        prev = None
        for n in res:
            err, dt = run(case, 8, n, args.R_max, args.delta)
            order = f"{np.log2(prev / err):7.2f}" if prev else "      -"
            print(f"{n:>6} {err:12.3e} {order} {dt:8.3f}")
            prev = err


if __name__ == "__main__":
    main()
