"""Channel transport for ranks running as threads of one process."""
from __future__ import annotations

import heapq
import itertools
import logging
import threading
import time
from typing import List, Optional, Tuple

from schedmpi.errors import TransportClosed
from schedmpi.transport.base import Inbox, Transport
from schedmpi.transport.envelope import Envelope

logger = logging.getLogger(__name__)


class _DelayLine:
    """Holds frames back for a fixed latency; equal delays keep per-stream order."""

    def __init__(self, fabric: "InprocFabric", latency_s: float) -> None:
        self._fabric = fabric
        self._latency_s = latency_s
        self._heap: List[Tuple[float, int, int, Envelope, bytes]] = []
        self._seq = itertools.count()
        self._cond = threading.Condition()
        self._closed = False
        self._thread = threading.Thread(target=self._run, name="inproc-delay", daemon=True)
        self._thread.start()

    def put(self, envelope: Envelope, payload: bytes) -> None:
        with self._cond:
            due = time.monotonic() + self._latency_s
            heapq.heappush(self._heap, (due, next(self._seq), envelope.dst, envelope, payload))
            self._cond.notify()

    def _run(self) -> None:
        while True:
            with self._cond:
                while not self._closed and not self._heap:
                    self._cond.wait()
                if self._closed and not self._heap:
                    return
                due = self._heap[0][0]
                remaining = due - time.monotonic()
                if remaining > 0:
                    self._cond.wait(remaining)
                    continue
                _, _, dst, envelope, payload = heapq.heappop(self._heap)
            self._fabric.inboxes[dst].push(envelope, payload)

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()
        self._thread.join()


class InprocFabric:
    """Shared state of an in-process world: one inbox and a stream lock per rank."""

    def __init__(self, size: int, latency_ms: float = 0.0) -> None:
        self.size = size
        self.inboxes = [Inbox() for _ in range(size)]
        self.closed = [False] * size
        self._stream_locks = [threading.Lock() for _ in range(size)]
        self._delay: Optional[_DelayLine] = None
        if latency_ms > 0:
            self._delay = _DelayLine(self, latency_ms / 1000.0)
        logger.debug("In-process fabric for %d ranks (latency %.3f ms)", size, latency_ms)

    def transport(self, rank: int) -> "InprocTransport":
        return InprocTransport(self, rank)

    def deliver(self, envelope: Envelope, payload: bytes) -> None:
        with self._stream_locks[envelope.dst]:
            if self.closed[envelope.dst]:
                raise TransportClosed(f"rank {envelope.dst} has shut down")
            if self._delay is not None:
                self._delay.put(envelope, payload)
            else:
                self.inboxes[envelope.dst].push(envelope, payload)

    def close_rank(self, rank: int) -> None:
        with self._stream_locks[rank]:
            self.closed[rank] = True

    def close(self) -> None:
        for rank in range(self.size):
            self.close_rank(rank)
        if self._delay is not None:
            self._delay.close()


class InprocTransport(Transport):
    def __init__(self, fabric: InprocFabric, rank: int) -> None:
        super().__init__(rank, fabric.size)
        self.fabric = fabric
        self.inbox = fabric.inboxes[rank]

    def _transmit(self, envelope: Envelope, payload: bytes) -> None:
        self.fabric.deliver(envelope, payload)

    def close(self) -> None:
        self.fabric.close_rank(self.rank)
