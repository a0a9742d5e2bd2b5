#!/usr/bin/env python3
"""Solve the two reference phase-transition instances and print the
measured wage-gradient behavior next to the closed-form predictions.

The supercritical instance (N theta = 5) fits the divergence exponent of
v' near the top skill; the subcritical one (N theta = 0.5) checks the
finite limiting slope.  Both use uniform student skills, exponential
technologies and c = 0.1, with the labor curve scaled so that the top
types all teach.
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


def make_instance(kind: str, n: int):
    k_top = 1.0
    bE = UtilityCurve.exponential(k_top)
    if kind == "supercritical":
        params = TechnologyParams(0.5, 0.5, 10.0, 1.0, 0.1, bE,
                                  UtilityCurve.exponential(k_top, amplitude=0.2), k_top)
    else:
        params = TechnologyParams(0.25, 0.9, 2.0, 1.0, 0.1, bE,
                                  UtilityCurve.exponential(k_top, amplitude=0.015), k_top)
    grid = SkillGrid(n, k_top)
    alpha = discretize_density(lambda x: np.ones_like(x), grid)
    return params, grid, alpha


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid-n", type=int, default=256)
    args = ap.parse_args()

    for kind in ("supercritical", "subcritical"):
        params, grid, alpha = make_instance(kind, args.grid_n)
        t0 = time.time()
        prof = solve_wages(params, alpha, grid, SolverConfig())
        rep = phase_fit(prof, params, grid, alpha=alpha)
        dt = time.time() - t0
        print(f"\n== {kind}: N={params.N:g} theta={params.theta:g} "
              f"(N theta = {params.N * params.theta:g}), n={grid.n}, {dt:.1f}s ==")
        print(f" converged={prof.converged}  envelope residual={prof.envelope_residual:.2e}")
        print(f" hypotheses: {rep.hypotheses}")
        if rep.declined:
            print(f" fit declined: {rep.declined}")
        if rep.fitted_exponent is not None:
            print(f" gradient exponent: fitted {rep.fitted_exponent:.4f} "
                  f"vs predicted {rep.predicted_exponent:.5f} "
                  f"({rep.usable_nodes} nodes, {rep.fit_octaves} octaves)")
        if rep.fitted_limit_slope is not None:
            err = abs(rep.fitted_limit_slope - rep.predicted_limit_slope) / rep.predicted_limit_slope
            print(f" limiting slope: fitted {rep.fitted_limit_slope:.5f} "
                  f"vs predicted {rep.predicted_limit_slope:.5f} (rel err {err:.2%})")
        if rep.density_ratio_measured is not None:
            print(f" top density ratio kappa/alpha: measured {rep.density_ratio_measured:.4f} "
                  f"vs predicted {rep.density_ratio_predicted:.4f}")
        print(f" top forward differences of v: {np.array2string(np.array(rep.vprime_top), precision=4)}")


if __name__ == "__main__":
    main()
