import numpy as np
import pytest

from pyramid_eq import SkillGrid, TechnologyParams, UtilityCurve, discretize_density


@pytest.fixture
def exp_curve():
    return UtilityCurve.exponential(1.0)


def make_params(theta=0.5, theta_prime=0.5, N=10.0, N_prime=10.0, c=0.5,
                k_top=1.0, bL_amp=1.0, bE_amp=1.0):
    bE = UtilityCurve.exponential(k_top, amplitude=bE_amp)
    bL = UtilityCurve.exponential(k_top, amplitude=bL_amp)
    return TechnologyParams(theta, theta_prime, N, N_prime, c, bE, bL, k_top)


def uniform_alpha(grid: SkillGrid):
    return discretize_density(lambda x: np.ones_like(x), grid)


def linear_alpha(grid: SkillGrid):
    return discretize_density(
        lambda x: 2.0 * np.asarray(x, dtype=float) / grid.k_top ** 2, grid)
