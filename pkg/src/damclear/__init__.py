"""Day-ahead market clearing with block and minimum-income orders."""

from .backend import (
    BackendError,
    SolveOptions,
    SolveOutcome,
    available_backends,
    get_backend,
    register_backend,
    resolve_duals,
    solve_lp,
    solve_mip,
)
from .engine import (
    RULESETS,
    ClearingError,
    ClearingRequest,
    clear,
    compare_pab_models,
    heuristic_mic_block,
    heuristic_min_oc,
    heuristic_volume,
)
from .fileio import (
    FORMAT_VERSION,
    FileFormatError,
    GeneratorConfig,
    atc_network,
    generate,
    parse,
    parse_instance,
    read_solution,
    serialize,
    write_instance,
    write_report,
    write_solution,
)
from .milp import (
    OBJECTIVES,
    BigMSet,
    MilpModel,
    ModelFormError,
    add_mic_constraints,
    big_m_set,
    build_umfs,
    compute_big_m_block,
    compute_big_m_mic,
    forbid_paradoxical_acceptance,
    restrict_to_pcr,
    set_objective,
    write_lp,
)
from .model import (
    AtcLine,
    BlockBid,
    BlockSurplusTerms,
    ClearingSolution,
    HourlyBid,
    Instance,
    InstanceIndex,
    InvalidInstanceError,
    MicBid,
    MicSuborder,
    Network,
    block_surplus_terms,
    single_node_network,
    total_block_opportunity_cost,
    traded_volume,
    traded_volume_half_abs,
    validate_instance,
    welfare,
)
from .oracle import (
    OracleGuardError,
    OracleOptimum,
    SelectionOracleResult,
    SelectionRecord,
    cross_check,
    enumerate_selections,
)
from .verify import (
    FamilyResult,
    Tolerances,
    VerificationReport,
    Violation,
    opportunity_cost_summary,
    verify_equilibrium,
    verify_mic_income,
)

__version__ = "0.1.0"

__all__ = [
    "AtcLine",
    "BackendError",
    "BigMSet",
    "BlockBid",
    "BlockSurplusTerms",
    "ClearingError",
    "ClearingRequest",
    "ClearingSolution",
    "FORMAT_VERSION",
    "FamilyResult",
    "FileFormatError",
    "GeneratorConfig",
    "HourlyBid",
    "Instance",
    "InstanceIndex",
    "InvalidInstanceError",
    "MicBid",
    "MicSuborder",
    "MilpModel",
    "ModelFormError",
    "Network",
    "OBJECTIVES",
    "OracleGuardError",
    "OracleOptimum",
    "RULESETS",
    "SelectionOracleResult",
    "SelectionRecord",
    "SolveOptions",
    "SolveOutcome",
    "Tolerances",
    "VerificationReport",
    "Violation",
    "add_mic_constraints",
    "atc_network",
    "available_backends",
    "big_m_set",
    "block_surplus_terms",
    "build_umfs",
    "clear",
    "compare_pab_models",
    "compute_big_m_block",
    "compute_big_m_mic",
    "cross_check",
    "enumerate_selections",
    "forbid_paradoxical_acceptance",
    "generate",
    "get_backend",
    "heuristic_mic_block",
    "heuristic_min_oc",
    "heuristic_volume",
    "opportunity_cost_summary",
    "parse",
    "parse_instance",
    "read_solution",
    "register_backend",
    "resolve_duals",
    "restrict_to_pcr",
    "serialize",
    "set_objective",
    "single_node_network",
    "solve_lp",
    "solve_mip",
    "total_block_opportunity_cost",
    "traded_volume",
    "traded_volume_half_abs",
    "validate_instance",
    "verify_equilibrium",
    "verify_mic_income",
    "welfare",
    "write_instance",
    "write_lp",
    "write_report",
    "write_solution",
]
