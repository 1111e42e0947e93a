"""Collectives built only from the public request and schedule API, plus blocking baselines."""
from __future__ import annotations

import logging
from typing import Any

import numpy as np

from schedmpi.collectives.plans import Topology, plan_bcast, reduce_children, reduce_parent
from schedmpi.persistent.persistent_requests import irecv, isend, recv_init, send_init, wait, waitall
from schedmpi.persistent.reduce_ops import ReduceOpDescriptor, as_vector
from schedmpi.progress.communicator import (
    BARRIER_CONTEXT,
    DIRECT_COLLECTIVE_CONTEXT,
    SCHEDULED_COLLECTIVE_CONTEXT,
    Communicator,
)
from schedmpi.schedule.schedule import (
    CompositeRequest,
    schedule_add_mpi_operation,
    schedule_add_operation,
    schedule_commit,
    schedule_create,
    schedule_create_round,
)
from schedmpi.transport.envelope import Datatype

logger = logging.getLogger(__name__)


def _copy(invec: np.ndarray, inoutvec: np.ndarray, length: int, dtype: Datatype) -> None:
    inoutvec[:length] = invec[:length]


COPY = ReduceOpDescriptor.user(_copy)


def _commit_owned(sched: Any) -> CompositeRequest:
    request = schedule_commit(sched)
    sched.free_with_request = True
    return request


def bcast_schedule_init(
    comm: Communicator,
    buffer: Any,
    count: int,
    dtype: Datatype,
    root: int = 0,
    topology: Topology = Topology.BINOMIAL,
) -> CompositeRequest:
    """Restartable broadcast: receive from the tree parent, then one round of sends."""
    plan = plan_bcast(comm.size, root, topology)
    tag = comm.next_collective_tag()
    sched = schedule_create(comm, auto_free=True)
    parent = plan.parent(comm.rank)
    if parent is not None:
        schedule_add_operation(
            sched, recv_init(comm, buffer, count, dtype, parent, tag, context=SCHEDULED_COLLECTIVE_CONTEXT)
        )
        schedule_create_round(sched)
    for edge in sorted(plan.sends(comm.rank), key=lambda edge: edge.round_index):
        schedule_add_operation(
            sched, send_init(comm, buffer, count, dtype, edge.peer, tag, context=SCHEDULED_COLLECTIVE_CONTEXT)
        )
    if comm.size == 1:
        # nothing to move, but the composite still needs one operation
        schedule_add_mpi_operation(sched, COPY, buffer, buffer, 0, dtype)
    logger.debug("Rank %d built %s bcast schedule from root %d", comm.rank, topology.value, root)
    return _commit_owned(sched)


def reduce_schedule_init(
    comm: Communicator,
    sendbuf: Any,
    recvbuf: Any,
    count: int,
    dtype: Datatype,
    op: ReduceOpDescriptor,
    root: int = 0,
) -> CompositeRequest:
    """Binomial reduction to rank 0, forwarded to `root` when it is not 0.

    Children are combined one per round in increasing distance, which fixes the
    combine order and makes floating-point results repeatable.
    """
    rank, size = comm.rank, comm.size
    tree_tag = comm.next_collective_tag()
    forward_tag = comm.next_collective_tag()
    context = SCHEDULED_COLLECTIVE_CONTEXT
    if rank == 0 and root == 0:
        acc = as_vector(recvbuf, dtype, writable=True)
    else:
        acc = np.empty(count, dtype=dtype.numpy_dtype)
    children = reduce_children(size, rank)
    scratch = [np.empty(count, dtype=dtype.numpy_dtype) for _ in children]

    sched = schedule_create(comm, auto_free=True)
    schedule_add_mpi_operation(sched, COPY, sendbuf, acc, count, dtype)
    for child, temp in zip(children, scratch):
        schedule_add_operation(sched, recv_init(comm, temp, count, dtype, child, tree_tag, context=context))
    schedule_create_round(sched)
    for temp in scratch:
        schedule_add_mpi_operation(sched, op, temp, acc, count, dtype)
        schedule_create_round(sched)
    parent = reduce_parent(rank)
    if parent is not None:
        schedule_add_operation(sched, send_init(comm, acc, count, dtype, parent, tree_tag, context=context))
        schedule_create_round(sched)
    if root != 0:
        if rank == 0:
            schedule_add_operation(sched, send_init(comm, acc, count, dtype, root, forward_tag, context=context))
        elif rank == root:
            schedule_add_operation(sched, recv_init(comm, recvbuf, count, dtype, 0, forward_tag, context=context))
    return _commit_owned(sched)


def direct_bcast(
    comm: Communicator,
    buffer: Any,
    count: int,
    dtype: Datatype,
    root: int = 0,
    topology: Topology = Topology.BINOMIAL,
) -> None:
    """Blocking broadcast over the same tree, one transient request per edge."""
    plan = plan_bcast(comm.size, root, topology)
    tag = comm.next_collective_tag()
    parent = plan.parent(comm.rank)
    if parent is not None:
        wait(irecv(comm, buffer, count, dtype, parent, tag, context=DIRECT_COLLECTIVE_CONTEXT))
    sends = [
        isend(comm, buffer, count, dtype, edge.peer, tag, context=DIRECT_COLLECTIVE_CONTEXT)
        for edge in sorted(plan.sends(comm.rank), key=lambda edge: edge.round_index)
    ]
    waitall(sends)


def barrier(comm: Communicator) -> None:
    """Dissemination barrier of zero-byte messages on the reserved barrier context."""
    tag = comm.next_barrier_tag()
    empty = np.zeros(0, dtype=np.uint8)
    distance = 1
    while distance < comm.size:
        incoming = irecv(comm, empty, 0, Datatype.BYTE, (comm.rank - distance) % comm.size, tag, context=BARRIER_CONTEXT)
        outgoing = isend(comm, empty, 0, Datatype.BYTE, (comm.rank + distance) % comm.size, tag, context=BARRIER_CONTEXT)
        waitall([outgoing, incoming])
        distance <<= 1
