"""First-price pacing equilibria from item samples: solving, inference, A/B testing."""

from .market import (
    GenerationError,
    ItemBatch,
    MarketDefinition,
    ValueDistribution,
    problem_from_json,
    problem_to_json,
    sample_items,
    scale_budgets_and_values,
    scale_values_and_supply,
)
from .solver import (
    ConsistencyError,
    EquilibriumSolution,
    SolverConfig,
    SolverError,
    dual_eg_objective,
    equilibrium_summary,
    recover_allocation,
    solve_dual_eg,
    solve_fppe,
    verify_solution,
)
from .limit import estimate_limit_expectations, solve_limit_dual_averaging
from .inference import (
    InferenceReport,
    confidence_interval_rev,
    confidence_region_beta,
    estimate_active_set,
    infer,
    influence_estimates,
    numerical_hessian,
    plugin_covariances,
    projected_hessian_pinv,
)
from .abtest import (
    ABDesign,
    ABTestResult,
    ExperimentError,
    decide,
    run_ab_experiment,
    treatment_effect_ci,
)

__version__ = "0.1.0"

__all__ = [
    "ABDesign",
    "ABTestResult",
    "ConsistencyError",
    "EquilibriumSolution",
    "ExperimentError",
    "GenerationError",
    "InferenceReport",
    "ItemBatch",
    "MarketDefinition",
    "SolverConfig",
    "SolverError",
    "ValueDistribution",
    "confidence_interval_rev",
    "confidence_region_beta",
    "decide",
    "dual_eg_objective",
    "equilibrium_summary",
    "estimate_active_set",
    "estimate_limit_expectations",
    "infer",
    "influence_estimates",
    "numerical_hessian",
    "plugin_covariances",
    "problem_from_json",
    "problem_to_json",
    "projected_hessian_pinv",
    "recover_allocation",
    "run_ab_experiment",
    "sample_items",
    "scale_budgets_and_values",
    "scale_values_and_supply",
    "solve_dual_eg",
    "solve_fppe",
    "solve_limit_dual_averaging",
    "treatment_effect_ci",
    "verify_solution",
]
