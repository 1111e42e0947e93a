"""Exact (context, source, tag) matching with posted and unexpected FIFOs."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, Generic, Optional, TypeVar

from schedmpi.transport.base import Frame
from schedmpi.transport.envelope import Envelope

Receiver = TypeVar("Receiver")


@dataclass(frozen=True)
class MatchKey:
    context: int
    src: int
    tag: int

    @classmethod
    def of(cls, envelope: Envelope) -> "MatchKey":
        return cls(envelope.context, envelope.src, envelope.tag)


class MatchQueues(Generic[Receiver]):
    """Not thread-safe; the engine serializes access with its match lock."""

    def __init__(self) -> None:
        self.posted: Dict[MatchKey, Deque[Receiver]] = {}
        self.unexpected: Dict[MatchKey, Deque[Frame]] = {}

    def post(self, key: MatchKey, receiver: Receiver) -> Optional[Frame]:
        """Match against the oldest unexpected frame, else queue the receive."""
        waiting = self.unexpected.get(key)
        if waiting:
            frame = waiting.popleft()
            if not waiting:
                del self.unexpected[key]
            return frame
        self.posted.setdefault(key, deque()).append(receiver)
        return None

    def arrive(self, envelope: Envelope, payload: bytes) -> Optional[Receiver]:
        """Match against the oldest posted receive, else park the frame."""
        key = MatchKey.of(envelope)
        receivers = self.posted.get(key)
        if receivers:
            receiver = receivers.popleft()
            if not receivers:
                del self.posted[key]
            return receiver
        self.unexpected.setdefault(key, deque()).append((envelope, payload))
        return None

    def pending_counts(self) -> Dict[str, int]:
        return {
            "posted": sum(len(queue) for queue in self.posted.values()),
            "unexpected": sum(len(queue) for queue in self.unexpected.values()),
        }
