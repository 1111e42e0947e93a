"""Strong progress engine: dedicated threads complete started requests.

The application only starts and waits. Transmission and receive posting happen
in the starting thread so per-stream order equals start order; everything after
that (matching arrivals, copying payloads, running reduce operations, marking
requests complete, launching the next schedule round) runs on the engine's own
threads.
"""
from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, List, Optional, Set

from schedmpi.errors import EngineShutDown, InvalidState
from schedmpi.progress.matching import MatchKey, MatchQueues
from schedmpi.transport.base import Transport
from schedmpi.transport.envelope import Envelope

if TYPE_CHECKING:  # pragma: no cover
    from schedmpi.persistent.persistent_requests import PersistentRequest, RecvRequest, Status
    from schedmpi.schedule.event_log import EventLog

logger = logging.getLogger(__name__)

_STOP = object()


@dataclass(frozen=True)
class EngineConfig:
    progress_threads: int = 1

    def __post_init__(self) -> None:
        if self.progress_threads < 1:
            raise ValueError("progress_threads must be at least 1")


class ProgressEngine:
    def __init__(
        self,
        transport: Transport,
        config: Optional[EngineConfig] = None,
        *,
        event_log: Optional["EventLog"] = None,
    ) -> None:
        self.transport = transport
        self.rank = transport.rank
        self.config = config or EngineConfig()
        self.event_log = event_log
        self.matching: MatchQueues["RecvRequest"] = MatchQueues()
        self.closed = False
        self.completions = 0
        self._work: "queue.Queue[object]" = queue.Queue()
        self._match_lock = threading.Lock()
        self._stats_lock = threading.Lock()
        self._waiters: Set["PersistentRequest"] = set()
        self._waiters_lock = threading.Lock()
        self._threads: List[threading.Thread] = []
        for index in range(self.config.progress_threads):
            thread = threading.Thread(
                target=self._run, name=f"progress-{self.rank}.{index}", daemon=True
            )
            thread.start()
            self._threads.append(thread)
        transport.set_doorbell(self._ring)
        logger.debug("Rank %d engine started with %d progress threads", self.rank, len(self._threads))

    @property
    def thread_idents(self) -> Set[Optional[int]]:
        return {thread.ident for thread in self._threads}

    def submit(self, request: "PersistentRequest") -> None:
        """Hand an Active request to the engine; it completes without further calls."""
        if self.closed:
            raise EngineShutDown(f"rank {self.rank} engine is shut down")
        if not request.is_active:
            raise InvalidState(f"request {request.id} must be Active to be submitted")
        request._progress(self)

    def defer(self, action: Callable[[], None]) -> None:
        if self.closed:
            raise EngineShutDown(f"rank {self.rank} engine is shut down")
        self._work.put(action)

    def defer_completion(self, request: "PersistentRequest", status: "Status") -> None:
        self.defer(lambda: self.complete(request, status))

    def complete(self, request: "PersistentRequest", status: "Status") -> None:
        request._finish(status)
        with self._stats_lock:
            self.completions += 1

    def post_receive(self, request: "RecvRequest") -> None:
        with self._match_lock:
            frame = self.matching.post(request.match_key, request)
        if frame is not None:
            envelope, payload = frame
            self.defer(lambda: self._deliver(request, envelope, payload))

    def _ring(self) -> None:
        self._work.put(self._drain_incoming)

    def _drain_incoming(self) -> None:
        while True:
            # poll and match under one lock so arrival order is matching order
            with self._match_lock:
                frame = self.transport.poll_incoming()
                if frame is None:
                    return
                envelope, payload = frame
                receiver = self.matching.arrive(envelope, payload)
            if receiver is not None:
                self._deliver(receiver, envelope, payload)

    def _deliver(self, request: "RecvRequest", envelope: Envelope, payload: bytes) -> None:
        self.complete(request, request._copy_in(envelope, payload))

    def _run(self) -> None:
        while True:
            item = self._work.get()
            if item is _STOP:
                return
            try:
                item()  # type: ignore[operator]
            except Exception:
                logger.exception("Rank %d progress thread action failed", self.rank)

    def register_waiter(self, request: "PersistentRequest") -> None:
        with self._waiters_lock:
            self._waiters.add(request)

    def unregister_waiter(self, request: "PersistentRequest") -> None:
        with self._waiters_lock:
            self._waiters.discard(request)

    def shutdown(self) -> None:
        if self.closed:
            return
        self.closed = True
        self.transport.set_doorbell(None)
        for _ in self._threads:
            self._work.put(_STOP)
        if threading.current_thread() not in self._threads:
            for thread in self._threads:
                thread.join()
        with self._waiters_lock:
            waiters = list(self._waiters)
        for request in waiters:
            request._wake()
        pending = self.matching.pending_counts()
        if pending["posted"] or pending["unexpected"]:
            logger.warning("Rank %d engine shut down with pending matches: %s", self.rank, pending)
        logger.debug("Rank %d engine stopped after %d completions", self.rank, self.completions)


__all__ = ["EngineConfig", "MatchKey", "ProgressEngine"]
