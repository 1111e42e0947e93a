"""User-level schedules: rounds of persistent sub-requests committed into one composite request.

A committed schedule splits into a run-once prologue (rounds before the reset
point), a body repeated on every start, and a run-once epilogue (rounds after
the completion point) executed when the composite is freed or at finalize.
Rounds are linked; the last sub-request of a round to complete launches the
next round from the progress thread that completed it.
"""
from __future__ import annotations

import itertools
import logging
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterator, List, Optional

from schedmpi.errors import (
    AlreadyCommitted,
    DoubleFree,
    EmptySchedule,
    EngineShutDown,
    Freed,
    InvalidHandle,
    InvalidMark,
    RequestActive,
    RequestOwned,
    StillActive,
)
from schedmpi.persistent.persistent_requests import (
    LocalOpRequest,
    PersistentRequest,
    RequestKind,
    Status,
    request_free,
)
from schedmpi.persistent.reduce_ops import ReduceOpDescriptor
from schedmpi.progress.communicator import Communicator
from schedmpi.transport.envelope import Datatype

logger = logging.getLogger(__name__)

_schedule_ids = itertools.count(1)
EPILOGUE_POLL_SECONDS = 0.1


class Phase(Enum):
    IDLE = "idle"
    RUN = "run"
    EPILOGUE = "epilogue"


@dataclass(frozen=True)
class ExecutionSpan:
    first_run: range
    steady_run: range
    epilogue: range


class Round:
    def __init__(self, schedule: "Schedule", index: int) -> None:
        self.schedule = schedule
        self.index = index
        self.subrequests: List[PersistentRequest] = []
        self.completion_counter = 0
        self.next: Optional["Round"] = None
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.subrequests)

    def launch(self, execution: int) -> None:
        """Start every member in insertion order; completions may arrive in any order."""
        with self._lock:
            self.completion_counter = 0
        comm = self.schedule.comm
        comm.log_event("round_launch", self.index, f"s{self.schedule.id}")
        for request in self.subrequests:
            request._begin(execution)
            try:
                comm.engine.submit(request)
            except EngineShutDown:
                logger.warning("Rank %d dropped round %d of schedule %d at shutdown", comm.rank, self.index, self.schedule.id)
                return

    def release(self, request: PersistentRequest) -> None:
        """Completion hook of a member; the last arriver advances the schedule."""
        # recorded before counting so the last arriver sees it
        if request.status.error is not None:
            self.schedule._record_failure(request.status.error)
        with self._lock:
            self.completion_counter += 1
            count = self.completion_counter
        if count > len(self.subrequests):
            raise AssertionError(f"round {self.index} released {count} of {len(self.subrequests)} members")
        if count == len(self.subrequests):
            self.schedule._round_finished(self)


class CompositeRequest(PersistentRequest):
    kind = RequestKind.SCHEDULE_COMPOSITE

    def __init__(self, schedule: "Schedule") -> None:
        super().__init__(schedule.comm)
        self.schedule = schedule

    def _check_startable(self) -> None:
        if self.schedule.freed or self.schedule.epilogue_ran:
            raise Freed(f"schedule {self.schedule.id} can no longer be started")

    def _begin(self, execution: int = -1) -> None:
        self._check_startable()
        super()._begin(execution)

    def _progress(self, engine: Any) -> None:
        self.schedule._start_execution()

    def _log_completion(self) -> None:
        super()._log_completion()
        self.comm.log_event("composite_complete", -1, f"s{self.schedule.id}")

    def _release_resources(self) -> None:
        self.schedule._run_epilogue()
        self.comm.live_composites.discard(self)
        if self.schedule.free_with_request and not self.schedule.freed:
            self.freed = True
            self.schedule.free()


class Schedule:
    def __init__(self, comm: Communicator, auto_free: bool = False) -> None:
        self.id = next(_schedule_ids)
        self.comm = comm
        self.rounds: List[Round] = [Round(self, 0)]
        self.reset_index = 0
        self.completion_index: Optional[int] = None
        self.committed = False
        self.auto_free_schedule = auto_free
        self.cursor = 0
        self.started_once = False
        self.freed = False
        self.request: Optional[CompositeRequest] = None
        self.phase = Phase.IDLE
        self.execution_number = 0
        self.epilogue_ran = False
        # first sub-request error of the running execution
        self.failure: Optional[BaseException] = None
        self._failure_lock = threading.Lock()
        # factory-built schedules are freed together with their composite
        self.free_with_request = False
        self.execution_lock = threading.Lock()
        self._epilogue_done = threading.Event()

    # -- building -----------------------------------------------------------

    @property
    def current_round(self) -> Round:
        return self.rounds[-1]

    def _check_building(self) -> None:
        if self.freed:
            raise InvalidHandle(f"schedule {self.id} has been freed")
        if self.committed:
            raise AlreadyCommitted(f"schedule {self.id} is committed")

    def _append(self, request: PersistentRequest, auto_free: bool) -> None:
        round_ = self.current_round
        request.owner = self
        request.round_ref = round_
        request.auto_free = auto_free
        round_.subrequests.append(request)

    def add_operation(self, request: PersistentRequest, auto_free: Optional[bool] = None) -> None:
        self._check_building()
        if request.freed:
            raise InvalidHandle(f"request {request.id} has been freed")
        if request.owner is not None:
            raise RequestOwned(f"request {request.id} already belongs to schedule {request.owner.id}")
        if request is self.request:
            raise RequestOwned("a schedule cannot contain its own composite")
        if request.is_active:
            raise RequestActive(f"request {request.id} is active")
        request._reset()
        self._append(request, self.auto_free_schedule if auto_free is None else auto_free)

    def add_mpi_operation(
        self, op: ReduceOpDescriptor, invec: Any, inoutvec: Any, length: int, dtype: Datatype
    ) -> LocalOpRequest:
        self._check_building()
        local = LocalOpRequest(self.comm, op, invec, inoutvec, length, dtype)
        self._append(local, True)
        return local

    def _close_current_round(self) -> None:
        if self.current_round.subrequests:
            fresh = Round(self, len(self.rounds))
            self.current_round.next = fresh
            self.rounds.append(fresh)

    def create_round(self) -> None:
        self._check_building()
        self._close_current_round()

    def mark_reset_point(self) -> None:
        """Rounds before the mark form the run-once prologue.

        A non-empty current round is closed first, so its operations belong to
        the prologue.
        """
        self._check_building()
        if self.completion_index is not None:
            raise InvalidMark("the reset point must be marked before the completion point")
        self._close_current_round()
        self.reset_index = len(self.rounds) - 1

    def mark_completion_point(self) -> None:
        """Rounds after the mark form the epilogue run once at free or finalize."""
        self._check_building()
        self._close_current_round()
        index = len(self.rounds) - 1
        if index < self.reset_index:
            raise InvalidMark(f"completion point {index} would precede reset point {self.reset_index}")
        self.completion_index = index

    def commit(self) -> CompositeRequest:
        self._check_building()
        if len(self.rounds) == 1 and not self.rounds[0].subrequests:
            raise EmptySchedule(f"schedule {self.id} has no operations")
        if not self.current_round.subrequests:
            self.rounds.pop()
            self.rounds[-1].next = None
        rounds = len(self.rounds)
        if self.completion_index is None or self.completion_index > rounds:
            self.completion_index = rounds
        self.reset_index = min(self.reset_index, self.completion_index)
        self.committed = True
        self.cursor = 0
        self.request = CompositeRequest(self)
        self.comm.live_composites.add(self.request)
        logger.debug(
            "Rank %d committed schedule %d: %d rounds, reset %d, completion %d",
            self.comm.rank, self.id, rounds, self.reset_index, self.completion_index,
        )
        return self.request

    # -- execution ----------------------------------------------------------

    @property
    def span(self) -> ExecutionSpan:
        completion = len(self.rounds) if self.completion_index is None else self.completion_index
        return ExecutionSpan(
            first_run=range(0, completion),
            steady_run=range(self.reset_index, completion),
            epilogue=range(completion, len(self.rounds)),
        )

    def will_run(self, request: PersistentRequest) -> bool:
        """True if `request` is still due in the running execution. Caller holds execution_lock."""
        if self.phase is Phase.IDLE or request.launched_in == self.execution_number:
            return False
        index = request.round_index
        if self.phase is Phase.EPILOGUE:
            return index in self.span.epilogue
        return self.cursor <= index < self.span.first_run.stop

    def _record_failure(self, error: BaseException) -> None:
        with self._failure_lock:
            if self.failure is None:
                self.failure = error
                logger.warning("Rank %d schedule %d stopped by a failed sub-request: %s", self.comm.rank, self.id, error)

    def _current_failure(self) -> Optional[BaseException]:
        with self._failure_lock:
            return self.failure

    def _start_execution(self) -> None:
        assert self.completion_index is not None and self.request is not None
        with self.execution_lock:
            first = self.reset_index if self.started_once else 0
            self.started_once = True
            self.cursor = first
            self.phase = Phase.RUN
            self.execution_number += 1
            execution = self.execution_number
        with self._failure_lock:
            self.failure = None
        if first >= self.completion_index:
            self.comm.engine.defer(self._execution_finished)
            return
        self.rounds[first].launch(execution)

    def _round_finished(self, round_: Round) -> None:
        failed = self._current_failure() is not None
        if self.phase is Phase.EPILOGUE:
            if round_.next is None or failed:
                with self.execution_lock:
                    self.phase = Phase.IDLE
                self._epilogue_done.set()
            else:
                round_.next.launch(self.execution_number)
            return
        following = round_.index + 1
        if not failed and round_.next is not None and following < self.completion_index:
            round_.next.launch(self.execution_number)
        else:
            self._execution_finished()

    def _execution_finished(self) -> None:
        with self.execution_lock:
            self.phase = Phase.IDLE
            for index in self.span.first_run:
                for request in self.rounds[index].subrequests:
                    request._reset()
            self.cursor = self.reset_index
        self.comm.engine.complete(self.request, Status(self.comm.rank, error=self._current_failure()))

    def _run_epilogue(self) -> None:
        if self.epilogue_ran or not self.committed:
            return
        self.epilogue_ran = True
        epilogue = self.span.epilogue
        if not epilogue:
            return
        with self.execution_lock:
            self.phase = Phase.EPILOGUE
            self.execution_number += 1
            execution = self.execution_number
        with self._failure_lock:
            self.failure = None
        self.comm.log_event("epilogue_start", epilogue.start, f"s{self.id}")
        self.rounds[epilogue.start].launch(execution)
        engine = self.comm.engine
        while not self._epilogue_done.wait(EPILOGUE_POLL_SECONDS):
            if engine.closed:
                raise EngineShutDown(f"rank {self.comm.rank} engine shut down during epilogue")
        for index in epilogue:
            for request in self.rounds[index].subrequests:
                request._reset()
        failure = self._current_failure()
        if failure is not None:
            logger.error("Rank %d epilogue of schedule %d failed: %s", self.comm.rank, self.id, failure)

    def subrequests(self) -> Iterator[PersistentRequest]:
        for round_ in self.rounds:
            yield from round_.subrequests

    def free(self) -> None:
        if self.freed:
            raise DoubleFree(f"schedule {self.id} was already freed")
        composite = self.request
        if composite is not None and not composite.freed:
            if composite.is_active:
                raise StillActive(f"composite of schedule {self.id} is still active")
            request_free(composite)
        for request in list(self.subrequests()):
            request.owner = None
            request.round_ref = None
            if request.auto_free and not request.freed:
                request_free(request)
            else:
                request._reset()
        self.freed = True
        logger.debug("Rank %d freed schedule %d", self.comm.rank, self.id)


# MPIX-style entry points


def schedule_create(comm: Communicator, auto_free: bool = False) -> Schedule:
    return Schedule(comm, auto_free)


def schedule_add_operation(sched: Schedule, request: PersistentRequest, auto_free: Optional[bool] = None) -> None:
    sched.add_operation(request, auto_free)


def schedule_add_mpi_operation(
    sched: Schedule, op: ReduceOpDescriptor, invec: Any, inoutvec: Any, length: int, dtype: Datatype
) -> LocalOpRequest:
    return sched.add_mpi_operation(op, invec, inoutvec, length, dtype)


def schedule_create_round(sched: Schedule) -> None:
    sched.create_round()


def schedule_mark_reset_point(sched: Schedule) -> None:
    sched.mark_reset_point()


def schedule_mark_completion_point(sched: Schedule) -> None:
    sched.mark_completion_point()


def schedule_commit(sched: Schedule) -> CompositeRequest:
    return sched.commit()


def schedule_free(sched: Schedule) -> None:
    sched.free()


def finalize_composites(comm: Communicator) -> None:
    """Run the epilogue of every composite never freed (the finalize trigger)."""
    for composite in sorted(comm.live_composites, key=lambda request: request.id):
        if composite.freed:
            continue
        if composite.is_active:
            logger.warning("Rank %d composite %d still active at finalize", comm.rank, composite.id)
            continue
        composite._release_resources()
    comm.live_composites.clear()


__all__ = [
    "CompositeRequest",
    "ExecutionSpan",
    "Phase",
    "Round",
    "Schedule",
    "finalize_composites",
    "schedule_add_mpi_operation",
    "schedule_add_operation",
    "schedule_commit",
    "schedule_create",
    "schedule_create_round",
    "schedule_free",
    "schedule_mark_completion_point",
    "schedule_mark_reset_point",
]
