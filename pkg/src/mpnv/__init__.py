"""Budget-constrained static multi-period newsvendor toolkit.

Fixed-distribution heuristic (`fd_solve`), likelihood-based ambiguity sets
(`mle`, `build_confidence_set`, `extreme_set`), cutting-surface DRO solver
(`cs_solve`) with exact/subgradient references (`full_minimax`), and a
Monte-Carlo oracle (`mc_cost`) validating the closed-form objectives.
"""

from .ambiguity import (
    AmbiguitySet,
    MleEstimate,
    base_grid,
    build_confidence_set,
    chi2_statistic,
    extreme_set,
    mle,
    parameter_intervals,
    prune_dominated,
)
from .cost import (
    NormalCostTerms,
    PoissonCostTerms,
    cost,
    normal_cost,
    normal_cost_grad_params,
    normal_cost_grad_q,
    normal_cost_terms,
    poisson_cost,
    poisson_cost_grad_lambda,
    poisson_cost_terms,
)
from .dro import (
    CsConfig,
    SubgradientConfig,
    cs_solve,
    full_minimax,
    gap_metrics,
    project_budget,
    subset_minimax,
    worst_case,
)
from .errors import (
    AmbiguityConstructionError,
    DegenerateSampleError,
    DimensionError,
    DomainError,
    InfeasibleInstanceError,
    MpnvError,
    MultiplierRangeError,
    ParameterError,
    ResourceLimitError,
)
from .experiments import ExperimentConfig, generate_instances, run_matrix
from .fd import KktCandidate, LineSearchConfig, fd_solve, kkt_solution, nu_upper_bound
from .report import write_report
from .reports import GapMetrics, SolveReport
from .simulate import mc_cost, sample_demand, simulate_inventory
from .types import DemandModel, Instance, OrderPlan, SampleSet, load_problem, save_problem

__version__ = "0.1.0"

__all__ = [
    "AmbiguityConstructionError", "AmbiguitySet", "CsConfig", "DegenerateSampleError",
    "DemandModel", "DimensionError", "DomainError", "ExperimentConfig", "GapMetrics",
    "InfeasibleInstanceError", "Instance", "KktCandidate", "LineSearchConfig",
    "MleEstimate", "MpnvError", "MultiplierRangeError", "NormalCostTerms", "OrderPlan",
    "ParameterError", "PoissonCostTerms", "ResourceLimitError", "SampleSet",
    "SolveReport", "SubgradientConfig", "base_grid", "build_confidence_set",
    "chi2_statistic", "cost", "cs_solve", "extreme_set", "fd_solve", "full_minimax",
    "gap_metrics", "generate_instances", "kkt_solution", "load_problem", "mc_cost",
    "mle", "normal_cost", "normal_cost_grad_params", "normal_cost_grad_q",
    "normal_cost_terms", "nu_upper_bound", "parameter_intervals", "poisson_cost",
    "poisson_cost_grad_lambda", "poisson_cost_terms", "project_budget",
    "prune_dominated", "run_matrix", "sample_demand", "save_problem",
    "simulate_inventory", "subset_minimax", "worst_case", "write_report",
]
