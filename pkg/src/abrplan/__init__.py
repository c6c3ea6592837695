"""abrplan: anticipative transmission scheduling and quality planning for
adaptive video streaming over a predicted capacity window."""

from .defaults import default_trace_config, default_video_spec
from .errors import (
    AbrPlanError,
    InfeasiblePartError,
    InfeasiblePlanError,
    InvalidScheduleError,
    MissingColumnError,
    NoFeasibleSessionError,
    NonMonotonicTimestampError,
    OracleBudgetError,
    StationaryLogError,
    TraceFormatError,
    TraceIngestError,
)
from .model import (
    CapacityTrace,
    QualityLevel,
    QualityPlan,
    SessionOutcome,
    ThresholdSchedule,
    VideoSpec,
    compute_cost,
    compute_quality,
    compute_utilization,
    make_threshold_schedule,
    weights_from_bitrates,
)
from .planner import (
    Candidate,
    InvestConfig,
    OracleResult,
    PartitionedPlan,
    PlanResult,
    StallPolicy,
    detect_stall_segments,
    enumerate_candidates,
    exhaustive_best_plan,
    fit_ascending_levels,
    invest_threshold,
    invest_threshold_candidates,
    optimal_threshold_candidates,
    plan_session,
    plan_with_stalls,
    relative_performance_error,
    select_candidate,
)
from .sim import (
    SimConfig,
    evaluate,
    exist_violation,
    playback_trajectory,
    run_session,
    transmit_video,
)
from .traces import (
    ColumnMap,
    RawBandwidthLog,
    SyntheticTraceConfig,
    coarsen,
    generate_synthetic,
    ingest_csv,
    load_trace,
    mean_trace,
    save_trace,
    temporal_mapping,
)

__version__ = "0.1.0"
