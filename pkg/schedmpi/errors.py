"""Exception types raised by the schedule runtime."""
from __future__ import annotations


class ScheduleRuntimeError(RuntimeError):
    """Root of every error raised by schedmpi."""


# transport
class TransportClosed(ScheduleRuntimeError):
    pass


class FrameError(ScheduleRuntimeError, ValueError):
    pass


class BindFailure(ScheduleRuntimeError):
    pass


# progress / requests
class EngineShutDown(ScheduleRuntimeError):
    pass


class InvalidHandle(ScheduleRuntimeError):
    pass


class InvalidState(ScheduleRuntimeError):
    pass


class AlreadyActive(ScheduleRuntimeError):
    pass


class StillActive(ScheduleRuntimeError):
    pass


class OwnedBySchedule(ScheduleRuntimeError):
    pass


class MessageTruncated(ScheduleRuntimeError):
    pass


class InvalidRank(ScheduleRuntimeError, ValueError):
    pass


class InvalidCount(ScheduleRuntimeError, ValueError):
    pass


class LengthMismatch(ScheduleRuntimeError, ValueError):
    pass


class UnsupportedDatatype(ScheduleRuntimeError, ValueError):
    pass


class InvalidBuffer(ScheduleRuntimeError, ValueError):
    pass


# schedule
class AlreadyCommitted(ScheduleRuntimeError):
    pass


class RequestOwned(ScheduleRuntimeError):
    pass


class RequestActive(ScheduleRuntimeError):
    pass


class InvalidMark(ScheduleRuntimeError):
    pass


class EmptySchedule(ScheduleRuntimeError):
    pass


class Freed(ScheduleRuntimeError):
    pass


class DoubleFree(ScheduleRuntimeError):
    pass


# harness
class PanicInRank(ScheduleRuntimeError):
    def __init__(self, rank: int, detail: str) -> None:
        super().__init__(f"rank {rank} failed: {detail}")
        self.rank = rank
        self.detail = detail
