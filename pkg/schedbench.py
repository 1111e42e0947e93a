"""schedbench: benchmark CLI for the schedule runtime.

    schedbench create-overhead --ops 64 --reps 1000
    schedbench bcast --ranks 8 --iters 100 --bytes 4096 [--transport tcp]
    schedbench bcast-grid [--full]
    schedbench overlap --ranks 4 --compute-blocks 6 --block-ms 20 --comm-seqs 3
"""
from __future__ import annotations

import logging
import os
import sys
from typing import List, Optional

import click
from dotenv import load_dotenv

from schedmpi.collectives.plans import Topology
from schedmpi.errors import ScheduleRuntimeError
from schedmpi.harness.bench import (
    BenchRecord,
    bench_bcast_grid,
    bench_bcast_ratio,
    bench_create_overhead,
    bench_overlap,
    write_csv,
)
from schedmpi.harness.world import LaunchMode, TransportKind, WorldConfig

load_dotenv()

logger = logging.getLogger("schedbench")


def _world_config(ctx: click.Context, transport: Optional[str] = None, **overrides) -> WorldConfig:
    settings = ctx.obj
    kind = TransportKind(transport) if transport else None
    if kind is TransportKind.TCP:
        # TCP from the command line means one process per rank
        overrides.setdefault("launch", LaunchMode.PROCESSES)
    return WorldConfig.from_env(
        transport=kind,
        progress_threads=settings["progress_threads"],
        event_log_path=settings["event_log"],
        **overrides,
    )


def _emit(ctx: click.Context, records: List[BenchRecord]) -> None:
    path = ctx.obj["csv"]
    if path:
        exists = os.path.exists(path) and os.path.getsize(path) > 0
        with open(path, "a", encoding="utf-8", newline="") as handle:
            write_csv(records, handle, header=not exists)
        click.echo(f"wrote {len(records)} rows to {path}")
    else:
        write_csv(records, sys.stdout)


def _run(ctx: click.Context, produce) -> None:
    try:
        records = produce()
    except (ScheduleRuntimeError, ValueError) as exc:
        logger.error("Benchmark failed: %s", exc)
        click.echo(f"error: {exc}", err=True)
        ctx.exit(1)
    _emit(ctx, records)


@click.group()
@click.option("--progress-threads", type=click.IntRange(min=1), default=None, help="Progress threads per rank.")
@click.option("--event-log", type=click.Path(dir_okay=False), default=None, help="Append debug events to this file.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="Append CSV rows here instead of stdout.")
@click.option("--log-level", default=None, help="Logging level (default from SCHEDBENCH_LOG_LEVEL or WARNING).")
@click.pass_context
def cli(ctx: click.Context, progress_threads, event_log, csv_path, log_level) -> None:
    level = (log_level or os.getenv("SCHEDBENCH_LOG_LEVEL", "WARNING")).upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    ctx.obj = {"progress_threads": progress_threads, "event_log": event_log, "csv": csv_path}


@cli.command("create-overhead")
@click.option("--ops", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--reps", type=click.IntRange(min=1), default=1000, show_default=True)
@click.pass_context
def create_overhead(ctx: click.Context, ops: int, reps: int) -> None:
    """Time create + adds + rounds + commit."""
    _run(ctx, lambda: bench_create_overhead(_world_config(ctx), ops, reps))


@cli.command("bcast")
@click.option("--ranks", type=click.IntRange(min=2), default=4, show_default=True)
@click.option("--iters", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--bytes", "nbytes", type=click.IntRange(min=0), default=4096, show_default=True)
@click.option("--transport", type=click.Choice(["inproc", "tcp"]), default=None)
@click.option("--topology", type=click.Choice(["binomial", "linear"]), default="binomial", show_default=True)
@click.pass_context
def bcast(ctx: click.Context, ranks: int, iters: int, nbytes: int, transport, topology: str) -> None:
    """Scheduled vs direct broadcast time."""
    _run(
        ctx,
        lambda: bench_bcast_ratio(_world_config(ctx, transport, size=ranks), ranks, iters, nbytes, Topology(topology)),
    )


@cli.command("bcast-grid")
@click.option("--bytes", "nbytes", type=click.IntRange(min=0), default=4096, show_default=True)
@click.option("--full", is_flag=True, help="Add 16 and 32 ranks to the grid.")
@click.option("--transport", type=click.Choice(["inproc", "tcp"]), default=None)
@click.pass_context
def bcast_grid(ctx: click.Context, nbytes: int, full: bool, transport) -> None:
    """Broadcast ratio over the ranks x iterations grid."""
    _run(ctx, lambda: bench_bcast_grid(_world_config(ctx, transport), nbytes, full=full))


@cli.command("overlap")
@click.option("--ranks", type=click.IntRange(min=2), default=4, show_default=True)
@click.option("--compute-blocks", type=click.IntRange(min=0), default=6, show_default=True)
@click.option("--block-ms", type=click.FloatRange(min=0), default=20.0, show_default=True)
@click.option("--comm-seqs", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--bytes", "nbytes", type=click.IntRange(min=0), default=1024, show_default=True)
@click.option("--iters", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--mode", type=click.Choice(["schedule", "manual"]), default="schedule", show_default=True)
@click.option("--latency-ms", type=click.FloatRange(min=0), default=None, help="In-process link latency.")
@click.option("--transport", type=click.Choice(["inproc", "tcp"]), default=None)
@click.pass_context
def overlap(
    ctx: click.Context,
    ranks: int,
    compute_blocks: int,
    block_ms: float,
    comm_seqs: int,
    nbytes: int,
    iters: int,
    mode: str,
    latency_ms,
    transport,
) -> None:
    """Free time left to the application while a schedule runs."""
    _run(
        ctx,
        lambda: bench_overlap(
            _world_config(ctx, transport, size=ranks, latency_ms=latency_ms),
            ranks,
            compute_blocks,
            block_ms,
            comm_seqs,
            nbytes=nbytes,
            iters=iters,
            mode=mode,
        ),
    )


if __name__ == "__main__":
    cli()
