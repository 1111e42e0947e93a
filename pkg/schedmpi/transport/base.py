"""Common transport surface shared by the in-process and TCP backends."""
from __future__ import annotations

import logging
import threading
from collections import deque
from typing import Callable, Deque, Optional, Tuple

from schedmpi.errors import LengthMismatch
from schedmpi.transport.envelope import Envelope

logger = logging.getLogger(__name__)

Frame = Tuple[Envelope, bytes]
Doorbell = Callable[[], None]


class Inbox:
    """FIFO of frames that arrived for one rank and are not yet polled."""

    def __init__(self) -> None:
        self._frames: Deque[Frame] = deque()
        self._lock = threading.Lock()
        self._doorbell: Optional[Doorbell] = None
        self.delivered = 0

    def set_doorbell(self, doorbell: Optional[Doorbell]) -> None:
        """Install the arrival callback; rings once for frames that arrived before it."""
        with self._lock:
            self._doorbell = doorbell
            backlog = len(self._frames)
        if doorbell is not None and backlog:
            doorbell()

    def push(self, envelope: Envelope, payload: bytes) -> None:
        with self._lock:
            self._frames.append((envelope, payload))
            self.delivered += 1
            doorbell = self._doorbell
        if doorbell is not None:
            doorbell()

    def pop(self) -> Optional[Frame]:
        with self._lock:
            if not self._frames:
                return None
            return self._frames.popleft()

    def __len__(self) -> int:
        with self._lock:
            return len(self._frames)


class Transport:
    """One rank's view of the fabric: send to any rank, poll own arrivals."""

    def __init__(self, rank: int, size: int) -> None:
        self.rank = rank
        self.size = size
        self.inbox = Inbox()
        self.sent = 0

    def set_doorbell(self, doorbell: Optional[Doorbell]) -> None:
        """Register the callback rung after every arrival (the progress engine's wakeup)."""
        self.inbox.set_doorbell(doorbell)

    def send_bytes(self, envelope: Envelope, payload: bytes) -> None:
        if envelope.src != self.rank:
            raise ValueError(f"rank {self.rank} cannot send with src={envelope.src}")
        envelope.validate(self.size)
        if len(payload) != envelope.payload_len:
            raise LengthMismatch(
                f"payload is {len(payload)} bytes, envelope says {envelope.payload_len}"
            )
        self._transmit(envelope, bytes(payload))
        self.sent += 1

    def poll_incoming(self) -> Optional[Frame]:
        """Next undelivered frame for this rank, or None. Never blocks."""
        return self.inbox.pop()

    @property
    def received(self) -> int:
        return self.inbox.delivered

    def _transmit(self, envelope: Envelope, payload: bytes) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError
