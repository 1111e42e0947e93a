"""Persistent requests: Inactive -> Active (start) -> Complete (engine) -> Active (restart)."""
from __future__ import annotations

import itertools
import logging
import threading
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Any, Iterable, List, Optional

import numpy as np

from schedmpi.errors import (
    AlreadyActive,
    EngineShutDown,
    InvalidCount,
    InvalidHandle,
    InvalidRank,
    InvalidState,
    MessageTruncated,
    OwnedBySchedule,
    StillActive,
    TransportClosed,
)
from schedmpi.persistent.reduce_ops import ReduceOpDescriptor, apply_reduce_op, as_vector, check_operands
from schedmpi.progress.communicator import Communicator
from schedmpi.progress.matching import MatchKey
from schedmpi.transport.envelope import Datatype, Envelope

if TYPE_CHECKING:  # pragma: no cover
    from schedmpi.progress.progress_engine import ProgressEngine
    from schedmpi.schedule.schedule import Round, Schedule

logger = logging.getLogger(__name__)

_request_ids = itertools.count(1)


class RequestState(Enum):
    INACTIVE = "inactive"
    ACTIVE = "active"
    COMPLETE = "complete"


class RequestKind(Enum):
    SEND = "send"
    RECV = "recv"
    LOCAL_OP = "local_op"
    SCHEDULE_COMPOSITE = "schedule_composite"


@dataclass
class Status:
    source: int = -1
    tag: int = -1
    count: int = 0
    error: Optional[BaseException] = None


class PersistentRequest:
    kind: RequestKind

    def __init__(self, comm: Communicator) -> None:
        self.comm = comm
        self.id = next(_request_ids)
        self.state = RequestState.INACTIVE
        self.status = Status()
        self.owner: Optional["Schedule"] = None
        self.round_ref: Optional["Round"] = None
        self.auto_free = False
        self.freed = False
        self.transient = False
        # execution number of the owning schedule when this request was last launched
        self.launched_in = -1
        self._cond = threading.Condition()
        self._generation = 0

    @property
    def is_active(self) -> bool:
        return self.state is RequestState.ACTIVE

    @property
    def label(self) -> str:
        if self.owner is not None:
            return f"s{self.owner.id}.r{self.id}"
        return f"r{self.id}"

    @property
    def round_index(self) -> int:
        return self.round_ref.index if self.round_ref is not None else -1

    def _check_startable(self) -> None:
        """Kind-specific start preconditions."""

    def _begin(self, execution: int = -1) -> None:
        with self._cond:
            if self.state is RequestState.ACTIVE:
                raise AlreadyActive(f"request {self.id} is already active")
            self.state = RequestState.ACTIVE
            self.status = Status()
            self.launched_in = execution
            self.comm.log_event("start", self.round_index, self.label)

    def _progress(self, engine: "ProgressEngine") -> None:
        raise NotImplementedError

    def _finish(self, status: Status) -> None:
        with self._cond:
            if self.state is not RequestState.ACTIVE:
                raise InvalidState(f"request {self.id} completed while {self.state.value}")
            self.state = RequestState.COMPLETE
            self.status = status
            self._log_completion()
            self._generation += 1
            self._cond.notify_all()
        self._on_complete()

    def _log_completion(self) -> None:
        self.comm.log_event("complete", self.round_index, self.label)

    def _on_complete(self) -> None:
        if self.round_ref is not None:
            self.round_ref.release(self)

    def _reset(self) -> None:
        with self._cond:
            if self.state is RequestState.COMPLETE:
                self.state = RequestState.INACTIVE

    def _wake(self) -> None:
        with self._cond:
            self._cond.notify_all()

    def _release_resources(self) -> None:
        """Kind-specific work done by request_free."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}(id={self.id}, state={self.state.value}, rank={self.comm.rank})"


class SendRequest(PersistentRequest):
    kind = RequestKind.SEND

    def __init__(
        self, comm: Communicator, buffer: Any, count: int, dtype: Datatype, dest: int, tag: int, context: int
    ) -> None:
        super().__init__(comm)
        self.buffer = as_vector(buffer, dtype)
        self.count = count
        self.dtype = dtype
        self.envelope = Envelope(context, comm.rank, dest, tag, dtype, count * dtype.elem_size)

    def _progress(self, engine: "ProgressEngine") -> None:
        payload = self.buffer[: self.count].tobytes()
        try:
            engine.transport.send_bytes(self.envelope, payload)
            status = Status(self.comm.rank, self.envelope.tag, self.count)
        except TransportClosed as exc:
            status = Status(error=exc)
        engine.defer_completion(self, status)


class RecvRequest(PersistentRequest):
    kind = RequestKind.RECV

    def __init__(
        self, comm: Communicator, buffer: Any, count: int, dtype: Datatype, source: int, tag: int, context: int
    ) -> None:
        super().__init__(comm)
        self.buffer = as_vector(buffer, dtype, writable=True)
        self.count = count
        self.dtype = dtype
        self.source = source
        self.match_key = MatchKey(context, source, tag)

    def _progress(self, engine: "ProgressEngine") -> None:
        engine.post_receive(self)

    def _copy_in(self, envelope: Envelope, payload: bytes) -> Status:
        capacity = self.count * self.dtype.elem_size
        if envelope.payload_len > capacity:
            return Status(
                envelope.src,
                envelope.tag,
                error=MessageTruncated(f"{envelope.payload_len}-byte message into {capacity}-byte receive"),
            )
        try:
            incoming = np.frombuffer(payload, dtype=self.dtype.numpy_dtype)
        except ValueError as exc:
            return Status(envelope.src, envelope.tag, error=exc)
        self.buffer[: incoming.size] = incoming
        return Status(envelope.src, envelope.tag, int(incoming.size))


class LocalOpRequest(PersistentRequest):
    """Reduce-op application; always executed on a progress thread."""

    kind = RequestKind.LOCAL_OP

    def __init__(
        self,
        comm: Communicator,
        desc: ReduceOpDescriptor,
        invec: Any,
        inoutvec: Any,
        length: int,
        dtype: Datatype,
    ) -> None:
        super().__init__(comm)
        check_operands(as_vector(invec, dtype), as_vector(inoutvec, dtype, writable=True), length)
        self.desc = desc
        self.invec = invec
        self.inoutvec = inoutvec
        self.length = length
        self.dtype = dtype

    def _progress(self, engine: "ProgressEngine") -> None:
        engine.defer(lambda: engine.complete(self, self._execute()))

    def _execute(self) -> Status:
        try:
            apply_reduce_op(self.desc, self.invec, self.inoutvec, self.length, self.dtype)
        except Exception as exc:
            logger.exception("Rank %d reduce op %s failed", self.comm.rank, self.desc.op.name)
            return Status(error=exc)
        return Status(self.comm.rank, count=self.length)


def _check_peer(comm: Communicator, peer: int) -> None:
    if not 0 <= peer < comm.size:
        raise InvalidRank(f"rank {peer} is outside a world of {comm.size}")


def _check_count(buffer: Any, count: int, dtype: Datatype) -> None:
    if count < 0:
        raise InvalidCount(f"count must be non-negative, got {count}")
    if count > as_vector(buffer, dtype).size:
        raise InvalidCount(f"count {count} exceeds the buffer")


def _check_handle(request: PersistentRequest) -> None:
    if request.freed:
        raise InvalidHandle(f"request {request.id} has been freed")


def send_init(
    comm: Communicator,
    buffer: Any,
    count: int,
    dtype: Datatype,
    dest: int,
    tag: int,
    *,
    context: Optional[int] = None,
) -> SendRequest:
    """Persistent send; nothing is transmitted until start."""
    _check_peer(comm, dest)
    _check_count(buffer, count, dtype)
    return SendRequest(comm, buffer, count, dtype, dest, tag, comm.context if context is None else context)


def recv_init(
    comm: Communicator,
    buffer: Any,
    count: int,
    dtype: Datatype,
    source: int,
    tag: int,
    *,
    context: Optional[int] = None,
) -> RecvRequest:
    _check_peer(comm, source)
    _check_count(buffer, count, dtype)
    return RecvRequest(comm, buffer, count, dtype, source, tag, comm.context if context is None else context)


def start(request: PersistentRequest) -> None:
    _check_handle(request)
    if request.owner is not None:
        raise OwnedBySchedule(f"request {request.id} belongs to schedule {request.owner.id}")
    request._check_startable()
    request._begin()
    try:
        request.comm.engine.submit(request)
    except Exception:
        with request._cond:
            request.state = RequestState.INACTIVE
        raise


def startall(requests: Iterable[PersistentRequest]) -> None:
    for request in requests:
        start(request)


def _blocking_generation(request: PersistentRequest) -> Optional[int]:
    """Generation counter value to wait past, or None when the request needs no wait."""
    owner = request.owner
    if owner is not None:
        with owner.execution_lock, request._cond:
            pending = request.state is RequestState.INACTIVE and owner.will_run(request)
            if request.is_active or pending:
                return request._generation
            return None
    with request._cond:
        if request.is_active:
            return request._generation
        if request.state is RequestState.COMPLETE:
            return None
    raise InvalidState(f"request {request.id} was never started")


def wait(request: PersistentRequest) -> Status:
    """Block (no polling) until the request completes; raises the request's error if it failed."""
    _check_handle(request)
    request.comm.log_event("wait", request.round_index, request.label)
    generation = _blocking_generation(request)
    engine = request.comm.engine
    with request._cond:
        status = request.status
    if generation is not None:
        engine.register_waiter(request)
        try:
            with request._cond:
                while request._generation == generation:
                    if engine.closed:
                        raise EngineShutDown(f"rank {request.comm.rank} engine shut down during wait")
                    request._cond.wait()
                status = request.status
        finally:
            engine.unregister_waiter(request)
    if request.transient:
        request_free(request)
    if status.error is not None:
        raise status.error
    return status


def waitall(requests: Iterable[PersistentRequest]) -> List[Status]:
    return [wait(request) for request in requests]


def test(request: PersistentRequest) -> bool:
    """Non-blocking; inactive requests test as complete."""
    _check_handle(request)
    request.comm.log_event("test", request.round_index, request.label)
    owner = request.owner
    if owner is not None:
        with owner.execution_lock, request._cond:
            return not (request.is_active or (request.state is RequestState.INACTIVE and owner.will_run(request)))
    with request._cond:
        return not request.is_active


test.__test__ = False  # keep pytest from collecting the imported name


def request_free(request: PersistentRequest) -> None:
    _check_handle(request)
    if request.owner is not None:
        raise OwnedBySchedule(f"request {request.id} belongs to schedule {request.owner.id}")
    if request.is_active:
        raise StillActive(f"request {request.id} is still active")
    request._release_resources()
    request.freed = True


def isend(comm: Communicator, buffer: Any, count: int, dtype: Datatype, dest: int, tag: int, **kwargs: Any) -> SendRequest:
    """Started send that frees itself when waited."""
    request = send_init(comm, buffer, count, dtype, dest, tag, **kwargs)
    request.transient = True
    start(request)
    return request


def irecv(comm: Communicator, buffer: Any, count: int, dtype: Datatype, source: int, tag: int, **kwargs: Any) -> RecvRequest:
    request = recv_init(comm, buffer, count, dtype, source, tag, **kwargs)
    request.transient = True
    start(request)
    return request
