"""Decoder scheduling for virtualized QEC decoders: RR, MLS and gap-incremental CODA."""

from .coda import (
    CodaResult,
    FeasibilityOutcome,
    GapModel,
    SolverConfig,
    SolverFault,
    build_model,
    check_feasible,
    coda_schedule,
    expansion_ratio,
    pigeonhole_floor,
    stirling_bound,
    theoretical_search_space,
)
from .oracle import OracleResult, OracleTooLarge, brute_force
from .policy import AllocationError, AllocationMap, BacklogTrace, derive_backlog, schedule_mls, schedule_rr
from .verify import check_schedule
from .workload import (
    Workload,
    WorkloadError,
    WorkloadGenSpec,
    generate_clustered_workload,
    generate_phase_workload,
    generate_workload,
    load_workload,
    parse_workload,
    serialize_workload,
)

__version__ = "0.1.0"
