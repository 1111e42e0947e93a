from schedmpi.harness.bench import (
    CSV_HEADER,
    BenchRecord,
    bench_bcast_grid,
    bench_bcast_ratio,
    bench_create_overhead,
    bench_overlap,
    write_csv,
)
from schedmpi.harness.world import LaunchMode, TransportKind, World, WorldConfig, world_spawn

__all__ = [
    "CSV_HEADER",
    "BenchRecord",
    "LaunchMode",
    "TransportKind",
    "World",
    "WorldConfig",
    "bench_bcast_grid",
    "bench_bcast_ratio",
    "bench_create_overhead",
    "bench_overlap",
    "world_spawn",
    "write_csv",
]
