"""World launcher: one communicator, engine and transport per rank.

Ranks run as threads sharing one process (in-process fabric or loopback TCP)
or as spawned processes talking TCP. Every rank finishes with the finalize
sequence: drain composite epilogues, barrier, stop the engine, close the
transport.
"""
from __future__ import annotations

import logging
import multiprocessing
import os
import queue
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

from dotenv import load_dotenv

from schedmpi.collectives.collectives import barrier
from schedmpi.errors import PanicInRank
from schedmpi.progress.communicator import Communicator
from schedmpi.progress.progress_engine import EngineConfig, ProgressEngine
from schedmpi.schedule.event_log import EventLog, EventRecord, read_event_log
from schedmpi.schedule.schedule import finalize_composites
from schedmpi.transport.base import Transport
from schedmpi.transport.inproc_transport import InprocFabric
from schedmpi.transport.tcp_transport import TcpTransport, bind_listener, find_free_addresses

logger = logging.getLogger(__name__)

RankEntry = Callable[[Communicator], Any]
PROCESS_POLL_SECONDS = 0.5


class TransportKind(Enum):
    INPROC = "inproc"
    TCP = "tcp"


class LaunchMode(Enum):
    THREADS = "threads"
    PROCESSES = "processes"


@dataclass
class WorldConfig:
    size: int = 1
    transport: TransportKind = TransportKind.INPROC
    progress_threads: int = 1
    addresses: Optional[List[str]] = None
    event_log: bool = False
    event_log_path: Optional[str] = None
    launch: LaunchMode = LaunchMode.THREADS
    latency_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError(f"a world needs at least one rank, got {self.size}")
        if self.progress_threads < 1:
            raise ValueError("progress_threads must be at least 1")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")
        if self.addresses is not None and len(self.addresses) != self.size:
            raise ValueError(f"{len(self.addresses)} addresses for {self.size} ranks")
        if self.transport is TransportKind.INPROC and self.launch is LaunchMode.PROCESSES:
            raise ValueError("the in-process transport cannot span processes")
        if self.event_log_path:
            self.event_log = True

    @classmethod
    def from_env(cls, **overrides: Any) -> "WorldConfig":
        """Config from SCHEDBENCH_* variables (and a .env file); keyword overrides win."""
        load_dotenv()
        values: Dict[str, Any] = {
            "progress_threads": int(os.getenv("SCHEDBENCH_PROGRESS_THREADS", "1")),
            "transport": TransportKind(os.getenv("SCHEDBENCH_TRANSPORT", "inproc").lower()),
            "latency_ms": float(os.getenv("SCHEDBENCH_LATENCY_MS", "0")),
        }
        addresses = os.getenv("SCHEDBENCH_ADDRESSES")
        if addresses:
            values["addresses"] = [item.strip() for item in addresses.split(",") if item.strip()]
            values["size"] = len(values["addresses"])
        event_log_path = os.getenv("SCHEDBENCH_EVENT_LOG")
        if event_log_path:
            values["event_log_path"] = event_log_path
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


@dataclass
class World:
    config: WorldConfig
    results: List[Any] = field(default_factory=list)
    event_log: Optional[EventLog] = None

    @property
    def records(self) -> List[EventRecord]:
        if self.event_log is not None:
            return self.event_log.records
        if self.config.event_log_path:
            return read_event_log(self.config.event_log_path)
        return []


def _finalize(comm: Communicator) -> None:
    finalize_composites(comm)
    barrier(comm)


def _run_rank(
    rank: int,
    config: WorldConfig,
    make_transport: Callable[[int], Transport],
    entry: RankEntry,
    event_log: Optional[EventLog],
    register: Optional[Callable[[int, ProgressEngine], None]] = None,
    on_failure: Optional[Callable[[int, BaseException], None]] = None,
) -> Any:
    transport = make_transport(rank)
    engine = ProgressEngine(transport, EngineConfig(config.progress_threads), event_log=event_log)
    if register is not None:
        register(rank, engine)
    try:
        comm = Communicator(rank, config.size, engine, event_log=event_log)
        result = entry(comm)
        _finalize(comm)
        return result
    except BaseException as exc:
        # report before this rank closes its transport, so peers see an abort and not a closed link
        if on_failure is not None:
            on_failure(rank, exc)
        raise
    finally:
        engine.shutdown()
        transport.close()


def world_spawn(config: WorldConfig, entry: RankEntry) -> World:
    """Run `entry(comm)` on every rank and return once all ranks are finalized."""
    logger.info(
        "Starting %d-rank %s world (%s, %d progress threads)",
        config.size, config.transport.value, config.launch.value, config.progress_threads,
    )
    if config.launch is LaunchMode.PROCESSES:
        world = _spawn_processes(config, entry)
    else:
        world = _spawn_threads(config, entry)
    logger.info("World of %d ranks finished", config.size)
    return world


def _thread_transports(config: WorldConfig) -> Callable[[int], Transport]:
    if config.transport is TransportKind.INPROC:
        fabric = InprocFabric(config.size, config.latency_ms)
        return fabric.transport
    # bind every listener up front so no rank dials a port that is not open yet
    requested = config.addresses or ["127.0.0.1:0"] * config.size
    listeners = [bind_listener(address) for address in requested]
    resolved = [f"{sock.getsockname()[0]}:{sock.getsockname()[1]}" for sock in listeners]
    return lambda rank: TcpTransport(rank, resolved, listener=listeners[rank])


def _spawn_threads(config: WorldConfig, entry: RankEntry) -> World:
    event_log = EventLog(config.event_log_path) if config.event_log else None
    make_transport = _thread_transports(config)
    results: List[Any] = [None] * config.size
    failures: List[tuple] = []
    engines: Dict[int, ProgressEngine] = {}
    lock = threading.Lock()

    def register(rank: int, engine: ProgressEngine) -> None:
        with lock:
            engines[rank] = engine
            stopped = bool(failures)
        if stopped:
            engine.shutdown()

    def abort(rank: int, exc: BaseException) -> None:
        with lock:
            # only the first failure is the cause; later ones are fallout from the abort
            first = not failures
            if first:
                failures.append((rank, exc))
            running = list(engines.values())
        if first:
            logger.error("Rank %d failed, aborting the world", rank, exc_info=exc)
            for engine in running:
                engine.shutdown()

    def rank_main(rank: int) -> None:
        try:
            results[rank] = _run_rank(rank, config, make_transport, entry, event_log, register, abort)
        except BaseException as exc:  # noqa: BLE001 - reported as PanicInRank
            abort(rank, exc)

    threads = [threading.Thread(target=rank_main, args=(rank,), name=f"rank-{rank}") for rank in range(config.size)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    if event_log is not None:
        event_log.close()
    if failures:
        rank, exc = failures[0]
        raise PanicInRank(rank, f"{type(exc).__name__}: {exc}") from exc
    return World(config, results, event_log)


def _process_main(rank: int, config: WorldConfig, entry: RankEntry, results: "multiprocessing.Queue") -> None:
    logging.basicConfig(level=os.getenv("SCHEDBENCH_LOG_LEVEL", "WARNING").upper())
    event_log = EventLog(config.event_log_path) if config.event_log_path else None

    def make_transport(rank_: int) -> Transport:
        return TcpTransport(rank_, config.addresses or [])

    try:
        result = _run_rank(rank, config, make_transport, entry, event_log)
    except BaseException as exc:  # noqa: BLE001 - shipped to the parent
        logger.exception("Rank %d failed", rank)
        results.put(("error", rank, f"{type(exc).__name__}: {exc}"))
        return
    finally:
        if event_log is not None:
            event_log.close()
    results.put(("ok", rank, result))


def _spawn_processes(config: WorldConfig, entry: RankEntry) -> World:
    """TCP ranks as spawned processes; `entry` and its results must pickle."""
    if config.addresses is None:
        config = replace(config, addresses=find_free_addresses(config.size))
    context = multiprocessing.get_context("spawn")
    outcomes = context.Queue()
    processes = [
        context.Process(target=_process_main, args=(rank, config, entry, outcomes), name=f"rank-{rank}")
        for rank in range(config.size)
    ]
    for process in processes:
        process.start()
    results: List[Any] = [None] * config.size
    reported: Dict[int, str] = {}
    failure: Optional[PanicInRank] = None
    try:
        while len(reported) < config.size and failure is None:
            try:
                status, rank, payload = outcomes.get(timeout=PROCESS_POLL_SECONDS)
            except queue.Empty:
                for rank, process in enumerate(processes):
                    if rank not in reported and process.exitcode not in (None, 0):
                        failure = PanicInRank(rank, f"process exited with code {process.exitcode}")
                continue
            reported[rank] = status
            if status == "ok":
                results[rank] = payload
            else:
                failure = PanicInRank(rank, payload)
    finally:
        if failure is not None:
            for process in processes:
                if process.is_alive():
                    process.terminate()
        for process in processes:
            process.join()
    if failure is not None:
        raise failure
    return World(config, results)


__all__ = ["LaunchMode", "TransportKind", "World", "WorldConfig", "world_spawn"]
