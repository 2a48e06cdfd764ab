"""Admission control and scheduling of isochronous and asynchronous
service-period requests on a slotted beacon interval."""

from .admission import (
    AdmissionOutcome,
    AdmissionRejected,
    Decision,
    Mode,
    RejectReason,
    SchedulingInvariantError,
    Witness,
    admit,
    build_long_schedule,
    check_iso_utilization,
    evaluate,
    proportional_fair_cop,
    recompute_on_departure,
)
from .model import (
    EMPTY,
    BiSchedule,
    InvalidRequestError,
    Job,
    Kind,
    LongSchedule,
    ReqType,
    RequestRecord,
    SystemState,
    TrafficSpec,
    advance_bi,
    expand_iso_f_jobs,
)
from .runtime import ModeKind, RuntimeMode, next_bi_schedule, run_bi
from .sim import MetricsReport, Scenario, ScenarioRanges, generate_scenario, replay

__version__ = "0.1.0"
