from __future__ import annotations

import csv
import io

import pytest

from schedmpi.harness.bench import (
    CSV_HEADER,
    BenchRecord,
    bench_bcast_ratio,
    bench_create_overhead,
    bench_overlap,
    compute_block,
    write_csv,
)
from schedmpi.harness.world import WorldConfig
from schedmpi.schedule.event_log import count_events, read_event_log


def _by_metric(records):
    return {record.metric: record for record in records}


def test_csv_header_and_rows():
    records = [
        BenchRecord("bcast", 2, 10, 64, "binomial", "ratio", 98.5, "percent"),
        BenchRecord("overlap", 4, 5, 1024, "schedule", "free_time", 99.0, "percent"),
    ]
    handle = io.StringIO()
    assert write_csv(records, handle) == 2
    rows = list(csv.reader(io.StringIO(handle.getvalue())))
    assert rows[0] == ["experiment", "ranks", "iters", "bytes", "mode", "metric", "value", "units"]
    assert tuple(rows[0]) == CSV_HEADER
    assert rows[1] == ["bcast", "2", "10", "64", "binomial", "ratio", "98.5", "percent"]
    assert len(rows) == 3


def test_records_reject_negative_values():
    with pytest.raises(ValueError):
        BenchRecord("bcast", 2, 10, 64, "binomial", "ratio", -1.0, "percent")


def test_compute_block_runs_for_requested_time():
    assert compute_block(5) >= 0.005


def test_create_overhead_reports_mean_and_stddev():
    records = bench_create_overhead(WorldConfig(), ops_per_schedule=8, reps=20)
    metrics = _by_metric(records)
    assert set(metrics) == {"mean_ops8", "stddev_ops8"}
    assert metrics["mean_ops8"].units == "ms"


def test_create_overhead_with_no_ops_counts_errors():
    records = bench_create_overhead(WorldConfig(), ops_per_schedule=0, reps=10)
    assert [(record.metric, record.value, record.units) for record in records] == [
        ("commit_errors_ops0", 10.0, "count")
    ]


def test_identical_configs_give_identical_schemas():
    first = bench_bcast_ratio(WorldConfig(), 2, 10, 64)
    second = bench_bcast_ratio(WorldConfig(), 2, 10, 64)
    assert [record.metric for record in first] == ["direct_time", "scheduled_time", "ratio"]
    assert [(r.experiment, r.ranks, r.iters, r.bytes, r.mode, r.metric, r.units) for r in first] == [
        (r.experiment, r.ranks, r.iters, r.bytes, r.mode, r.metric, r.units) for r in second
    ]


def test_overlap_without_compute_has_no_free_time():
    records = bench_overlap(WorldConfig(), 2, 0, 10.0, 2, iters=2)
    assert _by_metric(records)["free_time"].value == 0.0


def test_manual_overlap_polls():
    records = bench_overlap(WorldConfig(latency_ms=2), 2, 3, 2.0, 3, iters=2, mode="manual")
    assert _by_metric(records)["app_test_calls"].value > 0


def test_overlap_rejects_unknown_mode():
    with pytest.raises(ValueError):
        bench_overlap(WorldConfig(), 2, 1, 1.0, 1, mode="eager")


@pytest.mark.bench
@pytest.mark.parametrize("ops", [1, 64])
def test_schedule_creation_is_cheap(ops):
    records = bench_create_overhead(WorldConfig(), ops_per_schedule=ops, reps=1000)
    assert _by_metric(records)[f"mean_ops{ops}"].value < 5.0


@pytest.mark.bench
def test_schedule_overlap_leaves_compute_time_free(tmp_path):
    path = tmp_path / "overlap.csv"
    config = WorldConfig(latency_ms=5, event_log_path=str(path))
    records = _by_metric(bench_overlap(config, 4, 6, 20.0, 3, iters=5))
    assert records["free_time"].value >= 90.0
    assert records["app_test_calls"].value == 0
    assert count_events(read_event_log(str(path)), "test") == 0


@pytest.mark.bench
def test_broadcast_ratio_trends():
    ratios = {}
    for ranks in (2, 4, 8):
        for iters in (10, 1000):
            ratios[(ranks, iters)] = _by_metric(bench_bcast_ratio(WorldConfig(), ranks, iters, 1024))["ratio"].value
    assert ratios[(2, 1000)] <= 110.0
    for ratio in ratios.values():
        assert 40.0 <= ratio <= 200.0
    for ranks in (2, 4, 8):
        short, long = ratios[(ranks, 10)], ratios[(ranks, 1000)]
        assert abs(short - long) / long < 0.15
