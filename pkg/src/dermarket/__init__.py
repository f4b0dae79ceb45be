"""Multi-period electricity market with dynamic demand-side assets:
competitive-equilibrium clearing, closed-loop simulation, and analytical
stability certificates."""

from .bidding import BidCurve, aggregate_demand, bid, make_curve, thresholds
from .clearing import (
    ClearingOutcome,
    CoupledQp,
    SupplyModel,
    clear_market,
    kkt_residual,
    qp_oracle,
    supply_at,
    unconstrained_maximizer,
)
from .der import (
    ControllabilityCheck,
    DerParams,
    FeasibleInput,
    MarketState,
    check_controllability,
    fallback_policy,
    feasible_input_set,
    step,
    validate_population,
)
from .errors import (
    ConfigError,
    GenerationError,
    MarketClearingError,
    MarketModelError,
    OracleConvergenceError,
    ParameterError,
    ProjectionIdentityError,
    StateInsideBoxError,
    StateOutsideBoxError,
)
from .generation import BOX_UNIFORM, Const, GenerationSpec, Offset, Scale, Uniform, generate_population
from .simulator import (
    ConvergenceReport,
    EquilibriumResult,
    ScenarioConfig,
    SegmentReport,
    TimeSeries,
    analyze_series,
    classify_segment,
    closed_loop_step,
    find_equilibrium,
    market_closed_loop_map,
    run_scenario,
)
from .stability import (
    Certificate,
    certify_multi,
    certify_single,
    decoupled_closed_loop_map,
    double_projection,
    empirical_contraction,
    lambda_approx,
    single_closed_loop_map,
)

__version__ = "0.1.0"
