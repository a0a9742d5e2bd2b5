#!/usr/bin/env python3
"""Grid-refinement study of the fitted wage-gradient exponent.

Each doubling of the grid resolves roughly one more teaching generation
inside the top teacher zone, so the octave fit of v' should close in on
log(N theta)/log N.  Prints one row per grid size with the fit error.
"""
import argparse
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from pyramid_eq import (
    SkillGrid,
    SolverConfig,
    TechnologyParams,
    UtilityCurve,
    discretize_density,
    phase_fit,
    solve_wages,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512])
    ap.add_argument("--N", type=float, default=10.0)
    ap.add_argument("--theta", type=float, default=0.5)
    args = ap.parse_args()

    k_top = 1.0
    params = TechnologyParams(args.theta, 0.5, args.N, 1.0, 0.1,
                              UtilityCurve.exponential(k_top),
                              UtilityCurve.exponential(k_top, amplitude=0.2), k_top)
    print(f"N={args.N:g} theta={args.theta:g}: predicted exponent "
          f"{np.log(args.N * args.theta) / np.log(args.N):.5f}")
    print(f"{'n':>6} {'fitted':>10} {'abs err':>10} {'nodes':>6} {'octaves':>8} {'time':>7}")
    for n in args.sizes:
        grid = SkillGrid(n, k_top)
        alpha = discretize_density(lambda x: np.ones_like(x), grid)
        t0 = time.time()
        prof = solve_wages(params, alpha, grid, SolverConfig())
        rep = phase_fit(prof, params, grid, alpha=alpha)
        dt = time.time() - t0
        if rep.fitted_exponent is None:
            print(f"{n:>6} {'declined':>10} {'-':>10} {rep.usable_nodes:>6} "
                  f"{rep.fit_octaves:>8} {dt:>6.1f}s   ({rep.declined})")
        else:
            err = abs(rep.fitted_exponent - rep.predicted_exponent)
            print(f"{n:>6} {rep.fitted_exponent:>10.4f} {err:>10.4f} "
                  f"{rep.usable_nodes:>6} {rep.fit_octaves:>8} {dt:>6.1f}s")


if __name__ == "__main__":
    main()
