"""Per-rank communication handle: rank, size, context id and the rank's engine."""
from __future__ import annotations

import itertools
import threading
from typing import TYPE_CHECKING, Optional, Set

from schedmpi.progress.progress_engine import ProgressEngine

if TYPE_CHECKING:  # pragma: no cover
    from schedmpi.schedule.schedule import CompositeRequest
    from schedmpi.schedule.event_log import EventLog

# Context ids 0-15 are reserved for runtime-internal traffic.
BARRIER_CONTEXT = 0
SCHEDULED_COLLECTIVE_CONTEXT = 1
DIRECT_COLLECTIVE_CONTEXT = 2
USER_CONTEXT = 16


class Communicator:
    def __init__(
        self,
        rank: int,
        size: int,
        engine: ProgressEngine,
        *,
        context: int = USER_CONTEXT,
        event_log: Optional["EventLog"] = None,
    ) -> None:
        if context < USER_CONTEXT:
            raise ValueError(f"user contexts start at {USER_CONTEXT}, got {context}")
        self.rank = rank
        self.size = size
        self.engine = engine
        self.context = context
        self.event_log = event_log
        self.live_composites: Set["CompositeRequest"] = set()
        self._lock = threading.Lock()
        self._collective_tags = itertools.count()
        self._barrier_tags = itertools.count()

    @property
    def transport(self):
        return self.engine.transport

    def next_collective_tag(self) -> int:
        # every rank builds collectives in the same order, so the counters agree
        with self._lock:
            return next(self._collective_tags)

    def next_barrier_tag(self) -> int:
        with self._lock:
            return next(self._barrier_tags)

    def log_event(self, event: str, round_index: int = -1, op: str = "-") -> None:
        if self.event_log is not None:
            self.event_log.record(self.rank, event, round_index, op)

    def __repr__(self) -> str:
        return f"Communicator(rank={self.rank}, size={self.size}, context={self.context})"
