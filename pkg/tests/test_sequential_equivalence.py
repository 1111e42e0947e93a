"""Randomized schedules checked against a single-threaded reference executor."""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Union

import numpy as np
import pytest

from schedmpi.harness.world import TransportKind
from schedmpi.persistent.persistent_requests import recv_init, request_free, send_init, start, wait
from schedmpi.persistent.reduce_ops import MAX, MIN, SUM
from schedmpi.schedule.event_log import verify_round_ordering
from schedmpi.schedule.schedule import (
    schedule_add_mpi_operation,
    schedule_add_operation,
    schedule_commit,
    schedule_create,
    schedule_create_round,
    schedule_free,
)
from schedmpi.transport.envelope import Datatype

BUFFERS = 6
LENGTH = 4
REPEATS = 2
OPS = {"sum": (SUM, np.add), "max": (MAX, np.maximum), "min": (MIN, np.minimum)}


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    tag: int
    src_buf: int
    dst_buf: int


@dataclass(frozen=True)
class LocalStep:
    rank: int
    op: str
    in_buf: int
    out_buf: int


Step = Union[Message, LocalStep]


@dataclass
class Plan:
    size: int
    rounds: List[List[Step]]
    initial: np.ndarray


def make_plan(rng: random.Random, size: int, index: int) -> Plan:
    rounds: List[List[Step]] = []
    tag = index * 100
    for _ in range(rng.randint(1, 4)):
        read = [set() for _ in range(size)]
        written = [set() for _ in range(size)]
        ops = [0] * size
        steps: List[Step] = []
        for _ in range(rng.randint(1, 4 * size)):
            if rng.random() < 0.6:
                src, dst = rng.randrange(size), rng.randrange(size)
                src_buf, dst_buf = rng.randrange(BUFFERS), rng.randrange(BUFFERS)
                busy = written[dst] | read[dst] | ({src_buf} if src == dst else set())
                if src_buf in written[src] or dst_buf in busy:
                    continue
                if ops[src] >= 4 or ops[dst] >= 4 or (src == dst and ops[src] >= 3):
                    continue
                read[src].add(src_buf)
                written[dst].add(dst_buf)
                ops[src] += 1
                ops[dst] += 1
                steps.append(Message(src, dst, tag, src_buf, dst_buf))
                tag += 1
            else:
                rank = rng.randrange(size)
                in_buf, out_buf = rng.sample(range(BUFFERS), 2)
                if in_buf in written[rank] or out_buf in written[rank] | read[rank] or ops[rank] >= 4:
                    continue
                read[rank].add(in_buf)
                written[rank].add(out_buf)
                ops[rank] += 1
                steps.append(LocalStep(rank, rng.choice(sorted(OPS)), in_buf, out_buf))
        rounds.append(steps)
    initial = np.array(
        [[[rng.randrange(10) for _ in range(LENGTH)] for _ in range(BUFFERS)] for _ in range(size)], dtype=np.int64
    )
    return Plan(size, rounds, initial)


def reference(plan: Plan) -> np.ndarray:
    buffers = plan.initial.copy()
    for _ in range(REPEATS):
        for steps in plan.rounds:
            messages = [step for step in steps if isinstance(step, Message)]
            payloads = {step.tag: buffers[step.src, step.src_buf].copy() for step in messages}
            for step in messages:
                buffers[step.dst, step.dst_buf] = payloads[step.tag]
            for step in steps:
                if isinstance(step, LocalStep):
                    ufunc = OPS[step.op][1]
                    buffers[step.rank, step.out_buf] = ufunc(buffers[step.rank, step.in_buf], buffers[step.rank, step.out_buf])
    return buffers


def run_plans(comm, plans: List[Plan]) -> List[np.ndarray]:
    rank = comm.rank
    outputs = []
    for plan in plans:
        buffers = plan.initial[rank].copy()
        sched = schedule_create(comm, auto_free=True)
        added = 0
        for steps in plan.rounds:
            schedule_create_round(sched)
            for step in steps:
                if isinstance(step, LocalStep):
                    if step.rank == rank:
                        desc = OPS[step.op][0]
                        schedule_add_mpi_operation(sched, desc, buffers[step.in_buf], buffers[step.out_buf], LENGTH, Datatype.INT64)
                        added += 1
                    continue
                if step.src == rank:
                    schedule_add_operation(
                        sched, send_init(comm, buffers[step.src_buf], LENGTH, Datatype.INT64, step.dst, step.tag)
                    )
                    added += 1
                if step.dst == rank:
                    schedule_add_operation(
                        sched, recv_init(comm, buffers[step.dst_buf], LENGTH, Datatype.INT64, step.src, step.tag)
                    )
                    added += 1
        if added:
            composite = schedule_commit(sched)
            for _ in range(REPEATS):
                start(composite)
                wait(composite)
            request_free(composite)
        schedule_free(sched)
        outputs.append(buffers.copy())
    return outputs


def _plans(seed: int, count: int) -> List[Plan]:
    rng = random.Random(seed)
    plans = []
    for index in range(count):
        plans.append(make_plan(rng, rng.randint(1, 4), index))
    return plans


def test_reference_executor_on_a_known_plan():
    plan = Plan(
        2,
        [[Message(0, 1, 0, 0, 1)], [LocalStep(1, "sum", 1, 2)]],
        np.arange(2 * BUFFERS * LENGTH, dtype=np.int64).reshape(2, BUFFERS, LENGTH),
    )
    result = reference(plan)
    np.testing.assert_array_equal(result[1, 1], plan.initial[0, 0])
    np.testing.assert_array_equal(result[1, 2], plan.initial[1, 2] + 2 * plan.initial[0, 0])


@pytest.mark.parametrize("progress_threads", [1, 2, 4])
def test_random_schedules_match_reference(run_world, transport_kind, progress_threads):
    count = 500 if transport_kind is TransportKind.INPROC else 60
    plans = _plans(1234 + progress_threads, count)
    for size in range(1, 5):
        sized = [plan for plan in plans if plan.size == size]
        if not sized:
            continue
        world = run_world(size, lambda comm: run_plans(comm, sized), progress_threads=progress_threads)
        for position, plan in enumerate(sized):
            expected = reference(plan)
            for rank in range(size):
                np.testing.assert_array_equal(world.results[rank][position], expected[rank])
        assert verify_round_ordering(world.records) == []
