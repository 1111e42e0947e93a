from schedmpi.progress.communicator import (
    BARRIER_CONTEXT,
    DIRECT_COLLECTIVE_CONTEXT,
    SCHEDULED_COLLECTIVE_CONTEXT,
    USER_CONTEXT,
    Communicator,
)
from schedmpi.progress.matching import MatchKey, MatchQueues
from schedmpi.progress.progress_engine import EngineConfig, ProgressEngine

__all__ = [
    "BARRIER_CONTEXT",
    "DIRECT_COLLECTIVE_CONTEXT",
    "SCHEDULED_COLLECTIVE_CONTEXT",
    "USER_CONTEXT",
    "Communicator",
    "EngineConfig",
    "MatchKey",
    "MatchQueues",
    "ProgressEngine",
]
