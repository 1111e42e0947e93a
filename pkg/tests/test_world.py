from __future__ import annotations

import numpy as np
import pytest

from schedmpi.collectives.collectives import direct_bcast
from schedmpi.errors import PanicInRank
from schedmpi.harness.world import LaunchMode, TransportKind, WorldConfig, world_spawn
from schedmpi.persistent.persistent_requests import start, wait
from schedmpi.persistent.reduce_ops import ReduceOpDescriptor
from schedmpi.schedule.event_log import count_events
from schedmpi.schedule.schedule import (
    schedule_add_mpi_operation,
    schedule_commit,
    schedule_create,
    schedule_mark_completion_point,
)
from schedmpi.transport.envelope import Datatype


def _broadcast_rank(comm):
    data = np.array([comm.rank * 10 + 1], dtype=np.int64)
    direct_bcast(comm, data, 1, Datatype.INT64, 0)
    return int(data[0])


def _failing_rank(comm):
    if comm.rank == 1:
        raise RuntimeError("boom")
    return comm.rank


def test_single_rank_world():
    world = world_spawn(WorldConfig(size=1), lambda comm: (comm.rank, comm.size))
    assert world.results == [(0, 1)]
    assert world.records == []


def test_results_come_back_in_rank_order(run_world):
    world = run_world(4, _broadcast_rank)
    assert world.results == [1, 1, 1, 1]


@pytest.mark.parametrize("failing", [0, 2])
def test_failing_rank_panics_the_world(run_world, failing):
    def entry(comm):
        if comm.rank == failing:
            raise RuntimeError("rank exploded")
        data = np.zeros(1, dtype=np.int32)
        direct_bcast(comm, data, 1, Datatype.INT32, failing)
        return 0

    with pytest.raises(PanicInRank) as info:
        run_world(4, entry)
    assert info.value.rank == failing
    assert "rank exploded" in info.value.detail


def test_finalize_runs_unfreed_epilogues(run_world):
    ran = []

    def entry(comm):
        def note(invec, inoutvec, length, dtype):
            ran.append(comm.rank)

        scratch = np.zeros(1, dtype=np.int32)
        sched = schedule_create(comm)
        schedule_add_mpi_operation(sched, ReduceOpDescriptor.user(lambda *args: None), scratch, scratch, 1, Datatype.INT32)
        schedule_mark_completion_point(sched)
        schedule_add_mpi_operation(sched, ReduceOpDescriptor.user(note), scratch, scratch, 1, Datatype.INT32)
        composite = schedule_commit(sched)
        start(composite)
        wait(composite)

    world = run_world(3, entry)
    assert sorted(ran) == [0, 1, 2]
    assert count_events(world.records, "epilogue_start") == 3


def test_event_log_written_to_file(tmp_path):
    path = tmp_path / "events.csv"
    world = world_spawn(WorldConfig(size=2, event_log_path=str(path)), _broadcast_rank)
    assert world.config.event_log
    assert path.read_text().splitlines()
    assert count_events(world.records, "round_launch") == 0
    assert count_events(world.records, "wait") > 0


def test_config_validation():
    with pytest.raises(ValueError):
        WorldConfig(size=0)
    with pytest.raises(ValueError):
        WorldConfig(size=2, transport=TransportKind.TCP, addresses=["127.0.0.1:1"])
    with pytest.raises(ValueError):
        WorldConfig(size=2, launch=LaunchMode.PROCESSES)
    with pytest.raises(ValueError):
        WorldConfig(size=2, progress_threads=0)


def test_config_from_environment(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("SCHEDBENCH_PROGRESS_THREADS", "3")
    monkeypatch.setenv("SCHEDBENCH_TRANSPORT", "tcp")
    monkeypatch.setenv("SCHEDBENCH_ADDRESSES", "127.0.0.1:7001, 127.0.0.1:7002")
    monkeypatch.setenv("SCHEDBENCH_EVENT_LOG", str(tmp_path / "log.csv"))
    config = WorldConfig.from_env()
    assert config.progress_threads == 3
    assert config.transport is TransportKind.TCP
    assert config.addresses == ["127.0.0.1:7001", "127.0.0.1:7002"]
    assert config.size == 2
    assert config.event_log
    assert WorldConfig.from_env(progress_threads=1).progress_threads == 1


def test_config_defaults_from_empty_environment(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    for name in ("SCHEDBENCH_PROGRESS_THREADS", "SCHEDBENCH_TRANSPORT", "SCHEDBENCH_ADDRESSES",
                 "SCHEDBENCH_EVENT_LOG", "SCHEDBENCH_LATENCY_MS"):
        monkeypatch.delenv(name, raising=False)
    config = WorldConfig.from_env(size=4)
    assert (config.size, config.transport, config.progress_threads, config.event_log) == (
        4, TransportKind.INPROC, 1, False,
    )


@pytest.mark.tcp
def test_tcp_processes_world():
    config = WorldConfig(size=3, transport=TransportKind.TCP, launch=LaunchMode.PROCESSES)
    assert world_spawn(config, _broadcast_rank).results == [1, 1, 1]


@pytest.mark.tcp
def test_tcp_processes_world_reports_failing_rank():
    config = WorldConfig(size=3, transport=TransportKind.TCP, launch=LaunchMode.PROCESSES)
    with pytest.raises(PanicInRank) as info:
        world_spawn(config, _failing_rank)
    assert info.value.rank == 1
