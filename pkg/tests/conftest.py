from __future__ import annotations

import logging
from typing import Any, Callable, Iterator, List

import pytest

from schedmpi.harness.world import TransportKind, World, WorldConfig, world_spawn
from schedmpi.progress.communicator import Communicator
from schedmpi.progress.progress_engine import EngineConfig, ProgressEngine
from schedmpi.schedule.event_log import EventLog
from schedmpi.transport.inproc_transport import InprocFabric

logging.getLogger("schedmpi").setLevel(logging.DEBUG)


@pytest.fixture
def event_log() -> Iterator[EventLog]:
    log = EventLog()
    yield log
    log.close()


@pytest.fixture
def make_comms(event_log: EventLog) -> Iterator[Callable[..., List[Communicator]]]:
    """Communicators of an in-process world driven directly from the test thread."""
    engines: List[ProgressEngine] = []
    fabrics: List[InprocFabric] = []

    def build(size: int = 1, progress_threads: int = 1, latency_ms: float = 0.0) -> List[Communicator]:
        fabric = InprocFabric(size, latency_ms)
        fabrics.append(fabric)
        comms = []
        for rank in range(size):
            engine = ProgressEngine(fabric.transport(rank), EngineConfig(progress_threads), event_log=event_log)
            engines.append(engine)
            comms.append(Communicator(rank, size, engine, event_log=event_log))
        return comms

    yield build
    for engine in engines:
        engine.shutdown()
    for fabric in fabrics:
        fabric.close()


@pytest.fixture
def comm(make_comms) -> Communicator:
    return make_comms(1)[0]


@pytest.fixture(params=[TransportKind.INPROC, pytest.param(TransportKind.TCP, marks=pytest.mark.tcp)], ids=["inproc", "tcp"])
def transport_kind(request) -> TransportKind:
    return request.param


@pytest.fixture
def run_world(transport_kind: TransportKind) -> Callable[..., World]:
    """world_spawn with ranks as threads over the parametrized transport."""

    def run(size: int, entry: Callable[[Communicator], Any], **overrides: Any) -> World:
        overrides.setdefault("event_log", True)
        return world_spawn(WorldConfig(size=size, transport=transport_kind, **overrides), entry)

    return run
