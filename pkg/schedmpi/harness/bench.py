"""Benchmarks: schedule creation overhead, scheduled vs direct broadcast, overlap free time.

Every experiment runs in a world built from a WorldConfig and returns a list
of BenchRecord rows sharing one CSV schema.
"""
from __future__ import annotations

import csv
import functools
import logging
import time
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Iterable, List, TextIO, Tuple

import numpy as np

from schedmpi.collectives.collectives import barrier, bcast_schedule_init, direct_bcast
from schedmpi.collectives.plans import Topology
from schedmpi.errors import EmptySchedule
from schedmpi.harness.world import WorldConfig, world_spawn
from schedmpi.persistent.persistent_requests import (
    recv_init,
    request_free,
    send_init,
    start,
    startall,
    test,
    wait,
    waitall,
)
from schedmpi.progress.communicator import Communicator
from schedmpi.schedule.schedule import (
    schedule_add_operation,
    schedule_commit,
    schedule_create,
    schedule_create_round,
    schedule_free,
)
from schedmpi.transport.envelope import Datatype

logger = logging.getLogger(__name__)

WARMUP_ITERATIONS = 5
OPS_PER_ROUND = 4
DESK_RANKS = (2, 4, 8)
FULL_RANKS = (2, 4, 8, 16, 32)
GRID_ITERS = (10, 50, 100, 1000)
CSV_HEADER = ("experiment", "ranks", "iters", "bytes", "mode", "metric", "value", "units")


@dataclass(frozen=True)
class BenchRecord:
    experiment: str
    ranks: int
    iters: int
    bytes: int
    mode: str
    metric: str
    value: float
    units: str

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError(f"{self.metric} must be non-negative, got {self.value}")

    def to_row(self) -> Tuple[Any, ...]:
        return tuple(asdict(self)[item.name] for item in fields(self))


def write_csv(records: Iterable[BenchRecord], handle: TextIO, *, header: bool = True) -> int:
    writer = csv.writer(handle, lineterminator="\n")
    if header:
        writer.writerow(CSV_HEADER)
    written = 0
    for record in records:
        writer.writerow(record.to_row())
        written += 1
    return written


def compute_block(block_ms: float) -> float:
    """Busy numpy work for `block_ms`; returns the seconds actually spent."""
    began = time.perf_counter()
    deadline = began + block_ms / 1000.0
    work = np.random.default_rng(0).random((64, 64))
    while time.perf_counter() < deadline:
        work = np.tanh(work @ work)
    return time.perf_counter() - began


def _sized(config: WorldConfig, ranks: int) -> WorldConfig:
    addresses = config.addresses if config.addresses and len(config.addresses) == ranks else None
    return replace(config, size=ranks, addresses=addresses)


# -- schedule creation overhead ------------------------------------------------


def _create_overhead_rank(comm: Communicator, ops: int, reps: int) -> Tuple[List[float], int]:
    buffer = np.zeros(1, dtype=np.int32)
    requests = [send_init(comm, buffer, 1, Datatype.INT32, comm.rank, tag) for tag in range(ops)]
    samples: List[float] = []
    errors = 0
    for rep in range(WARMUP_ITERATIONS + reps):
        measured = rep >= WARMUP_ITERATIONS
        began = time.perf_counter()
        sched = schedule_create(comm)
        try:
            for index, request in enumerate(requests):
                if index and index % OPS_PER_ROUND == 0:
                    schedule_create_round(sched)
                schedule_add_operation(sched, request)
            schedule_commit(sched)
        except EmptySchedule:
            if measured:
                errors += 1
        else:
            if measured:
                samples.append(time.perf_counter() - began)
        schedule_free(sched)
    for request in requests:
        request_free(request)
    return samples, errors


def bench_create_overhead(config: WorldConfig, ops_per_schedule: int, reps: int) -> List[BenchRecord]:
    """Wall time of create + adds + rounds + commit; nothing is started."""
    world = world_spawn(
        _sized(config, 1),
        functools.partial(_create_overhead_rank, ops=ops_per_schedule, reps=reps),
    )
    samples, errors = world.results[0]
    mode = config.transport.value
    records = []
    if samples:
        millis = np.asarray(samples) * 1000.0
        records.append(BenchRecord("create_overhead", 1, reps, 0, mode, f"mean_ops{ops_per_schedule}", float(millis.mean()), "ms"))
        records.append(BenchRecord("create_overhead", 1, reps, 0, mode, f"stddev_ops{ops_per_schedule}", float(millis.std()), "ms"))
    if errors:
        records.append(BenchRecord("create_overhead", 1, reps, 0, mode, f"commit_errors_ops{ops_per_schedule}", float(errors), "count"))
    return records


# -- broadcast ratio ---------------------------------------------------------------


def _bcast_rank(comm: Communicator, iters: int, nbytes: int, topology: Topology) -> Tuple[float, float]:
    buffer = np.zeros(nbytes, dtype=np.uint8)
    if comm.rank == 0:
        buffer[:] = np.arange(nbytes, dtype=np.uint64).astype(np.uint8)
    request = bcast_schedule_init(comm, buffer, nbytes, Datatype.BYTE, 0, topology)
    for _ in range(WARMUP_ITERATIONS):
        direct_bcast(comm, buffer, nbytes, Datatype.BYTE, 0, topology)
        start(request)
        wait(request)
    barrier(comm)
    began = time.perf_counter()
    for _ in range(iters):
        direct_bcast(comm, buffer, nbytes, Datatype.BYTE, 0, topology)
    direct = time.perf_counter() - began
    barrier(comm)
    began = time.perf_counter()
    for _ in range(iters):
        start(request)
        wait(request)
    scheduled = time.perf_counter() - began
    request_free(request)
    return direct, scheduled


def bench_bcast_ratio(
    config: WorldConfig, ranks: int, iters: int, nbytes: int, topology: Topology = Topology.BINOMIAL
) -> List[BenchRecord]:
    """Direct and scheduled totals (slowest rank) plus scheduled/direct in percent."""
    world = world_spawn(
        _sized(config, ranks),
        functools.partial(_bcast_rank, iters=iters, nbytes=nbytes, topology=topology),
    )
    direct = max(result[0] for result in world.results)
    scheduled = max(result[1] for result in world.results)
    ratio = scheduled / direct * 100.0 if direct > 0 else 0.0
    logger.info("bcast P=%d iters=%d bytes=%d: ratio %.1f%%", ranks, iters, nbytes, ratio)
    mode = topology.value
    return [
        BenchRecord("bcast", ranks, iters, nbytes, mode, "direct_time", direct * 1000.0, "ms"),
        BenchRecord("bcast", ranks, iters, nbytes, mode, "scheduled_time", scheduled * 1000.0, "ms"),
        BenchRecord("bcast", ranks, iters, nbytes, mode, "ratio", ratio, "percent"),
    ]


def bench_bcast_grid(config: WorldConfig, nbytes: int, *, full: bool = False) -> List[BenchRecord]:
    records: List[BenchRecord] = []
    for ranks in FULL_RANKS if full else DESK_RANKS:
        for iters in GRID_ITERS:
            records.extend(bench_bcast_ratio(config, ranks, iters, nbytes))
    return records


# -- overlap -------------------------------------------------------------------------


def _ring_requests(comm: Communicator, comm_sequences: int, nbytes: int) -> List[list]:
    right = (comm.rank + 1) % comm.size
    left = (comm.rank - 1) % comm.size
    sequences = []
    for seq in range(comm_sequences):
        outgoing = np.full(nbytes, comm.rank % 256, dtype=np.uint8)
        incoming = np.zeros(nbytes, dtype=np.uint8)
        sequences.append([
            recv_init(comm, incoming, nbytes, Datatype.BYTE, left, seq),
            send_init(comm, outgoing, nbytes, Datatype.BYTE, right, seq),
        ])
    return sequences


def _overlap_rank(
    comm: Communicator,
    compute_blocks: int,
    block_ms: float,
    comm_sequences: int,
    nbytes: int,
    iters: int,
    mode: str,
) -> Dict[str, Any]:
    sequences = _ring_requests(comm, comm_sequences, nbytes)
    composite = None
    if mode == "schedule":
        sched = schedule_create(comm, auto_free=True)
        for index, sequence in enumerate(sequences):
            if index:
                schedule_create_round(sched)
            for request in sequence:
                schedule_add_operation(sched, request)
        composite = schedule_commit(sched)
    compute_times: List[float] = []
    elapsed_times: List[float] = []
    test_calls = 0
    for iteration in range(WARMUP_ITERATIONS + iters):
        barrier(comm)
        began = time.perf_counter()
        computed = 0.0
        if composite is not None:
            start(composite)
            for _ in range(compute_blocks):
                computed += compute_block(block_ms)
            wait(composite)
        else:
            # the application drives each sequence itself and polls between blocks
            current = 0
            if sequences:
                startall(sequences[0])
            for _ in range(compute_blocks):
                computed += compute_block(block_ms)
                if current < len(sequences):
                    test_calls += len(sequences[current])
                    if all([test(request) for request in sequences[current]]):
                        waitall(sequences[current])
                        current += 1
                        if current < len(sequences):
                            startall(sequences[current])
            while current < len(sequences):
                waitall(sequences[current])
                current += 1
                if current < len(sequences):
                    startall(sequences[current])
        elapsed = time.perf_counter() - began
        if iteration >= WARMUP_ITERATIONS:
            compute_times.append(computed)
            elapsed_times.append(elapsed)
    if composite is not None:
        request_free(composite)
        schedule_free(sched)
    else:
        for sequence in sequences:
            for request in sequence:
                request_free(request)
    return {"compute": compute_times, "elapsed": elapsed_times, "test_calls": test_calls}


def bench_overlap(
    config: WorldConfig,
    ranks: int,
    compute_blocks: int,
    block_ms: float,
    comm_sequences: int,
    *,
    nbytes: int = 1024,
    iters: int = 5,
    mode: str = "schedule",
) -> List[BenchRecord]:
    """Share of start-to-wait time the application spends in its own compute blocks."""
    if mode not in ("schedule", "manual"):
        raise ValueError(f"mode must be schedule or manual, got {mode!r}")
    world = world_spawn(
        _sized(config, ranks),
        functools.partial(
            _overlap_rank,
            compute_blocks=compute_blocks,
            block_ms=block_ms,
            comm_sequences=comm_sequences,
            nbytes=nbytes,
            iters=iters,
            mode=mode,
        ),
    )
    compute = np.concatenate([np.asarray(result["compute"], dtype=float) for result in world.results])
    elapsed = np.concatenate([np.asarray(result["elapsed"], dtype=float) for result in world.results])
    free_time = float(np.mean(compute / elapsed) * 100.0) if elapsed.size else 0.0
    test_calls = sum(result["test_calls"] for result in world.results)
    return [
        BenchRecord("overlap", ranks, iters, nbytes, mode, "free_time", free_time, "percent"),
        BenchRecord("overlap", ranks, iters, nbytes, mode, "app_test_calls", float(test_calls), "count"),
        BenchRecord("overlap", ranks, iters, nbytes, mode, "elapsed", float(elapsed.mean() * 1000.0), "ms"),
    ]


__all__ = [
    "CSV_HEADER",
    "BenchRecord",
    "bench_bcast_grid",
    "bench_bcast_ratio",
    "bench_create_overhead",
    "bench_overlap",
    "compute_block",
    "write_csv",
]
