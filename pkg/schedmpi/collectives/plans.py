"""Broadcast trees as per-rank edge lists."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional


class Topology(Enum):
    LINEAR = "linear"
    BINOMIAL = "binomial"


class Direction(Enum):
    SEND = "send"
    RECV = "recv"


@dataclass(frozen=True)
class Edge:
    peer: int
    direction: Direction
    round_index: int


@dataclass
class BcastPlan:
    size: int
    root: int
    topology: Topology
    rounds: int
    edges: Dict[int, List[Edge]] = field(default_factory=dict)

    def sends(self, rank: int) -> List[Edge]:
        return [edge for edge in self.edges.get(rank, []) if edge.direction is Direction.SEND]

    def parent(self, rank: int) -> Optional[int]:
        for edge in self.edges.get(rank, []):
            if edge.direction is Direction.RECV:
                return edge.peer
        return None

    def by_round(self) -> Dict[int, List[tuple]]:
        """{round: [(src, dst), ...]} over the whole plan."""
        grouped: Dict[int, List[tuple]] = {}
        for rank, edges in sorted(self.edges.items()):
            for edge in edges:
                if edge.direction is Direction.SEND:
                    grouped.setdefault(edge.round_index, []).append((rank, edge.peer))
        return grouped


def _check(size: int, root: int) -> None:
    if size < 1:
        raise ValueError(f"need at least one rank, got {size}")
    if not 0 <= root < size:
        raise ValueError(f"root {root} outside a world of {size}")


def plan_binomial_bcast(size: int, root: int = 0) -> BcastPlan:
    """ceil(log2 P) rounds; in round i the ranks holding data send 2^(k-1-i) ahead."""
    _check(size, root)
    depth = (size - 1).bit_length()
    plan = BcastPlan(size, root, Topology.BINOMIAL, depth, {rank: [] for rank in range(size)})
    for round_index in range(depth):
        step = 1 << (depth - 1 - round_index)
        for relative in range(0, size, 2 * step):
            target = relative + step
            if target >= size:
                continue
            src = (relative + root) % size
            dst = (target + root) % size
            plan.edges[src].append(Edge(dst, Direction.SEND, round_index))
            plan.edges[dst].append(Edge(src, Direction.RECV, round_index))
    if size == 1:
        plan.edges = {}
    return plan


def plan_linear_bcast(size: int, root: int = 0) -> BcastPlan:
    _check(size, root)
    rounds = 1 if size > 1 else 0
    plan = BcastPlan(size, root, Topology.LINEAR, rounds, {rank: [] for rank in range(size)})
    for rank in range(size):
        if rank != root:
            plan.edges[root].append(Edge(rank, Direction.SEND, 0))
            plan.edges[rank].append(Edge(root, Direction.RECV, 0))
    if size == 1:
        plan.edges = {}
    return plan


def plan_bcast(size: int, root: int, topology: Topology) -> BcastPlan:
    if topology is Topology.LINEAR:
        return plan_linear_bcast(size, root)
    return plan_binomial_bcast(size, root)


def reduce_children(size: int, rank: int) -> List[int]:
    """Children of `rank` in the binomial reduction to rank 0, in combine order."""
    children = []
    mask = 1
    while mask < size:
        if rank & mask:
            break
        child = rank | mask
        if child < size:
            children.append(child)
        mask <<= 1
    return children


def reduce_parent(rank: int) -> Optional[int]:
    if rank == 0:
        return None
    return rank & (rank - 1)
