"""Markov interval maps with randomly activated holes: transfer operators,
conditionally stationary measures, escape rates, survival statistics and
survivor-set dimension."""

from .maps import (
    AffineBranch,
    CylinderWord,
    MarkovMap,
    SmoothBranch,
    check_markov,
    doubling_map,
    golden_mean_map,
    linear_full_map,
    perturbed_full_map,
    piecewise_linear_map,
    tripling_map,
)
from .noise import AhlforsReport, DiscreteHoleModel, NoiseModel, ahlfors_check, holder_check_g
from .openstats import (
    SurvivalRun,
    fit_log_slope,
    index_of_dispersion,
    simulate_tau,
    survival_curve,
)
from .potentials import (
    Potential,
    birkhoff_sum,
    combine,
    constant,
    estimate_seminorm,
    from_grid,
    geometric_potential,
    piecewise_constant,
)
from .survival import (
    BowenResult,
    SubshiftGraph,
    bowen_dimension,
    box_counting_estimate,
    build_avoidance_graph,
    is_survivor_set_nonempty,
    mu_hat_support,
)
from .thermo import (
    CylinderMeasure,
    PressureCurve,
    cylinder_bounds_check,
    dimension_spectrum,
    family_diagnostics,
    gibbs_check,
    markov_measure,
    pressure,
    psi_tilde,
    solve_T,
)
from .transfer import (
    ConvergenceError,
    OperatorMatrix,
    SpectralData,
    assemble_closed,
    assemble_open,
    conditionally_stationary,
    conformality_check,
    dominant_spectrum,
    equilibrium_measure,
    escape_rate,
    iterate_convergence,
    support_check,
    verify_reduction,
)

__version__ = "0.1.0"
