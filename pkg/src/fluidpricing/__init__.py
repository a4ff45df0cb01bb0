"""Price-based revenue management: fluid solvers, re-solving heuristics, exact DP, regret benchmarks."""

from .demand import (
    AssumptionConstants,
    DemandModel,
    MultiDemandModel,
    PriceInterval,
    model_from_dict,
    model_from_json,
    model_to_json,
    benchmark_model,
    validate_multi,
)
from .errors import (
    ConfigError,
    DegeneracyWarning,
    DomainError,
    ModelValidationError,
    ResourceGuardError,
    SolverError,
    UnsupportedModelError,
)
from .fluid import (
    FluidSolution,
    PartialOptimum,
    active_partition,
    partial_optimum,
    solve_fluid_multi,
    solve_fluid_single,
)
from .policies import (
    DpPolicy,
    HindsightInfo,
    PolicyDecision,
    ValueTable,
    dp_value,
    evaluate_policy_exact,
    exact_policy_values,
    ho_policy,
    multi_resolving_policy,
    resolving_policy,
    solve_dp,
    solve_dp_multi,
    static_policy,
)
from .sim import (
    BatchResult,
    Diagnostics,
    RegretReport,
    SimTrace,
    constant_bound,
    diagnostics,
    estimate_regret,
    fluid_value,
    gamma,
    harmonic_identity_check,
    harmonic_series,
    simulate,
    simulate_batch,
    simulate_batch_multi,
    simulate_multi,
)

__version__ = "0.1.0"
