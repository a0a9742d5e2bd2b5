"""Steady-state education/labor matching equilibria on a skill grid.

Solves the discretized planner's LP and its wage dual two independent
ways (exact simplex and damped envelope fixed-point iteration), verifies
the structural properties of the solutions (assortativity, specialization,
duality, convexity, tail bounds), and measures the wage-gradient phase
transition at N*theta = 1.
"""

from .model import (
    DiscretizationWarning,
    DoublingReport,
    GridCoupling,
    GridMeasure,
    SkillGrid,
    TechnologyParams,
    UtilityCurve,
    UtilityValidation,
    discretize_density,
    doubling_check,
    production_eval,
    pushforward_z,
    read_measure_csv,
    validate_utility,
    write_measure_csv,
    z_map,
)
from .wages import (
    ContinuationResult,
    SolverConfig,
    StabilityReport,
    WageProfile,
    bellman_step,
    convexify,
    delta_continuation,
    solve_wages,
    stability_residuals,
    wage_components,
)
from .lp import (
    DiscreteLP,
    DualityReport,
    LPSolution,
    assemble_primal,
    duality_report,
    feasible_seed,
    solve_lp,
    write_tableau,
)
from .analysis import (
    DensityReport,
    OccupationSplit,
    SpecializationReport,
    TeacherMap,
    adult_density,
    assortativity_check,
    coupling_from_profile,
    labor_coupling_from_profile,
    occupation_split,
    specialization_report,
    teacher_map_extract,
    uniqueness_probe,
)
from .pyramid import (
    DescendantChain,
    GuruHierarchy,
    InadmissiblePopulation,
    PhaseReport,
    TopSlopeReport,
    descendant_chain,
    gradient_bound,
    guru_census,
    nearest_admissible_populations,
    phase_fit,
    render_hierarchy,
    top_slopes,
)

__version__ = "0.1.0"
