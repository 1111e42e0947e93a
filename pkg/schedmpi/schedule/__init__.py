from schedmpi.schedule.event_log import (
    EventLog,
    EventRecord,
    count_events,
    count_round_launches,
    events_between,
    read_event_log,
    verify_round_ordering,
)
from schedmpi.schedule.schedule import (
    CompositeRequest,
    ExecutionSpan,
    Phase,
    Round,
    Schedule,
    finalize_composites,
    schedule_add_mpi_operation,
    schedule_add_operation,
    schedule_commit,
    schedule_create,
    schedule_create_round,
    schedule_free,
    schedule_mark_completion_point,
    schedule_mark_reset_point,
)

__all__ = [
    "CompositeRequest",
    "EventLog",
    "EventRecord",
    "ExecutionSpan",
    "Phase",
    "Round",
    "Schedule",
    "count_events",
    "count_round_launches",
    "events_between",
    "finalize_composites",
    "read_event_log",
    "schedule_add_mpi_operation",
    "schedule_add_operation",
    "schedule_commit",
    "schedule_create",
    "schedule_create_round",
    "schedule_free",
    "schedule_mark_completion_point",
    "schedule_mark_reset_point",
    "verify_round_ordering",
]
