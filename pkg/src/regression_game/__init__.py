"""Strategic-noise linear regression games: estimators, equilibria, efficiency."""

from .aitken import AitkenComparison, ScalingSweep, aitken_compare, equilibrium_under_estimator, scaling_sweep
from .efficiency import (
    BoundSource,
    EfficiencyReport,
    SandwichCheck,
    check_superconvexity,
    fixed_point_map,
    pos_bound,
    price_of_stability,
    sandwich_check,
    social_cost,
    solve_social_optimum,
)
from .estimation import (
    ActionProfile,
    EstimatorSpec,
    MonteCarloReport,
    NoiseKind,
    RegressionInstance,
    gls_covariance,
    gls_estimate,
    lue_covariance,
    lue_estimate,
    monte_carlo_validate,
    precision_matrix,
    random_null_direction,
)
from .exceptions import (
    ConfigError,
    ConvergenceError,
    CovarianceUndefinedError,
    DegenerateProfileError,
    InfiniteCostError,
    InvalidEstimatorError,
    RegressionGameError,
    StencilError,
    ZeroWeightPerturbationError,
)
from .game import (
    ActiveSets,
    CustomCost,
    EquilibriumResult,
    EquilibriumStatus,
    GameSpec,
    MonomialCost,
    PrivacyCostSpec,
    best_response,
    best_response_dynamics,
    is_trivial_equilibrium,
    kkt_residual,
    max_unilateral_improvement,
    player_cost,
    potential,
    solve_equilibrium,
)
from .scalarization import (
    ExtendedCost,
    ScalarizationKind,
    estimation_cost,
    estimation_cost_gradient,
    finite_difference_gradient,
    is_degenerate,
)

__version__ = "0.1.0"

__all__ = [
    "ActionProfile",
    "ActiveSets",
    "AitkenComparison",
    "BoundSource",
    "ConfigError",
    "ConvergenceError",
    "CovarianceUndefinedError",
    "CustomCost",
    "DegenerateProfileError",
    "EfficiencyReport",
    "EquilibriumResult",
    "EquilibriumStatus",
    "EstimatorSpec",
    "ExtendedCost",
    "GameSpec",
    "InfiniteCostError",
    "InvalidEstimatorError",
    "MonomialCost",
    "MonteCarloReport",
    "NoiseKind",
    "PrivacyCostSpec",
    "RegressionGameError",
    "RegressionInstance",
    "SandwichCheck",
    "ScalarizationKind",
    "ScalingSweep",
    "StencilError",
    "ZeroWeightPerturbationError",
    "aitken_compare",
    "best_response",
    "best_response_dynamics",
    "check_superconvexity",
    "equilibrium_under_estimator",
    "estimation_cost",
    "estimation_cost_gradient",
    "finite_difference_gradient",
    "fixed_point_map",
    "gls_covariance",
    "gls_estimate",
    "is_degenerate",
    "is_trivial_equilibrium",
    "kkt_residual",
    "lue_covariance",
    "lue_estimate",
    "max_unilateral_improvement",
    "monte_carlo_validate",
    "player_cost",
    "pos_bound",
    "potential",
    "precision_matrix",
    "price_of_stability",
    "random_null_direction",
    "sandwich_check",
    "scaling_sweep",
    "social_cost",
    "solve_equilibrium",
    "solve_social_optimum",
]
