"""User-level communication schedules over persistent point-to-point requests."""
from schedmpi.errors import ScheduleRuntimeError
from schedmpi.harness.world import WorldConfig, world_spawn
from schedmpi.persistent import (
    irecv,
    isend,
    recv_init,
    request_free,
    send_init,
    start,
    startall,
    test,
    wait,
    waitall,
)
from schedmpi.progress.communicator import Communicator
from schedmpi.schedule import (
    schedule_add_mpi_operation,
    schedule_add_operation,
    schedule_commit,
    schedule_create,
    schedule_create_round,
    schedule_free,
    schedule_mark_completion_point,
    schedule_mark_reset_point,
)
from schedmpi.transport.envelope import Datatype

__version__ = "0.1.0"

__all__ = [
    "Communicator",
    "Datatype",
    "ScheduleRuntimeError",
    "WorldConfig",
    "irecv",
    "isend",
    "recv_init",
    "request_free",
    "schedule_add_mpi_operation",
    "schedule_add_operation",
    "schedule_commit",
    "schedule_create",
    "schedule_create_round",
    "schedule_free",
    "schedule_mark_completion_point",
    "schedule_mark_reset_point",
    "send_init",
    "start",
    "startall",
    "test",
    "wait",
    "waitall",
    "world_spawn",
]
