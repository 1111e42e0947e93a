from __future__ import annotations

import itertools

import numpy as np
import pytest

from schedmpi.errors import (
    AlreadyActive,
    InvalidCount,
    InvalidHandle,
    InvalidRank,
    InvalidState,
    MessageTruncated,
    StillActive,
)
from schedmpi.persistent.persistent_requests import (
    RequestState,
    irecv,
    isend,
    recv_init,
    request_free,
    send_init,
    start,
    startall,
    test,
    wait,
    waitall,
)
from schedmpi.transport.envelope import Datatype


def test_restarted_pair_moves_fresh_data_each_time(make_comms):
    sender, receiver = make_comms(2)
    outgoing = np.zeros(8, dtype=np.float64)
    incoming = np.zeros(8, dtype=np.float64)
    send = send_init(sender, outgoing, 8, Datatype.FLOAT64, 1, 0)
    recv = recv_init(receiver, incoming, 8, Datatype.FLOAT64, 0, 0)
    for iteration in range(50):
        outgoing[:] = iteration
        startall([recv, send])
        waitall([send, recv])
        assert incoming.tolist() == [float(iteration)] * 8
    assert send.state is RequestState.COMPLETE
    request_free(send)
    request_free(recv)


def test_start_while_active_fails(comm):
    request = recv_init(comm, np.zeros(1, dtype=np.int32), 1, Datatype.INT32, 0, 1)
    start(request)
    with pytest.raises(AlreadyActive):
        start(request)


def test_failed_submit_leaves_request_restartable(comm, monkeypatch):
    request = send_init(comm, np.array([3], dtype=np.int32), 1, Datatype.INT32, 0, 2)

    def broken_submit(_request):
        raise RuntimeError("submit failed")

    monkeypatch.setattr(comm.engine, "submit", broken_submit)
    with pytest.raises(RuntimeError, match="submit failed"):
        start(request)
    assert request.state is RequestState.INACTIVE
    monkeypatch.undo()
    target = np.zeros(1, dtype=np.int32)
    receive = irecv(comm, target, 1, Datatype.INT32, 0, 2)
    start(request)
    wait(request)
    wait(receive)
    assert target[0] == 3


def test_never_started_request(comm):
    request = send_init(comm, np.zeros(1, dtype=np.int32), 1, Datatype.INT32, 0, 1)
    assert test(request)
    with pytest.raises(InvalidState):
        wait(request)


def test_free_then_use_is_invalid(comm):
    request = send_init(comm, np.zeros(1, dtype=np.int32), 1, Datatype.INT32, 0, 1)
    request_free(request)
    with pytest.raises(InvalidHandle):
        test(request)
    with pytest.raises(InvalidHandle):
        start(request)
    with pytest.raises(InvalidHandle):
        request_free(request)


def test_free_active_request_fails(comm):
    request = recv_init(comm, np.zeros(1, dtype=np.int32), 1, Datatype.INT32, 0, 2)
    start(request)
    with pytest.raises(StillActive):
        request_free(request)
    assert not test(request)


def test_oversized_message_truncates(comm):
    target = np.zeros(2, dtype=np.int32)
    request = irecv(comm, target, 2, Datatype.INT32, 0, 4)
    wait(isend(comm, np.arange(4, dtype=np.int32), 4, Datatype.INT32, 0, 4))
    with pytest.raises(MessageTruncated):
        wait(request)


def test_shorter_message_reports_its_count(comm):
    target = np.full(4, -1, dtype=np.int32)
    request = irecv(comm, target, 4, Datatype.INT32, 0, 4)
    wait(isend(comm, np.array([5, 6], dtype=np.int32), 2, Datatype.INT32, 0, 4))
    status = wait(request)
    assert status.count == 2
    assert target.tolist() == [5, 6, -1, -1]


def test_zero_count_self_message(comm):
    empty = np.zeros(0, dtype=np.uint8)
    recv = irecv(comm, empty, 0, Datatype.BYTE, 0, 0)
    send = isend(comm, empty, 0, Datatype.BYTE, 0, 0)
    statuses = waitall([send, recv])
    assert statuses[1].count == 0
    assert send.freed and recv.freed


@pytest.mark.parametrize("peer", [-1, 1])
def test_peer_outside_world(comm, peer):
    with pytest.raises(InvalidRank):
        send_init(comm, np.zeros(1, dtype=np.int32), 1, Datatype.INT32, peer, 0)
    with pytest.raises(InvalidRank):
        recv_init(comm, np.zeros(1, dtype=np.int32), 1, Datatype.INT32, peer, 0)


@pytest.mark.parametrize("count", [-1, 3])
def test_count_outside_buffer(comm, count):
    with pytest.raises(InvalidCount):
        send_init(comm, np.zeros(2, dtype=np.int32), count, Datatype.INT32, 0, 0)


# Model of one receive request: each call's expected outcome and next state.
def _expected(state: str, call: str):
    if state == "freed":
        return InvalidHandle, state
    if call == "start":
        return (AlreadyActive, state) if state == "active" else (None, "active")
    if call == "test":
        return (state != "active"), state
    if call == "wait":
        if state == "fresh":
            return InvalidState, state
        return None, "complete"
    if state == "active":
        return StillActive, state
    return None, "freed"


def test_state_machine_matches_model(comm):
    calls = ("start", "test", "wait", "free")
    sequences = itertools.chain.from_iterable(itertools.product(calls, repeat=n) for n in range(1, 7))
    for tag, sequence in enumerate(sequences):
        request = recv_init(comm, np.zeros(1, dtype=np.int32), 1, Datatype.INT32, 0, tag)
        state = "fresh"
        for call in sequence:
            outcome, next_state = _expected(state, call)
            if call == "wait" and state == "active":
                # give the posted receive something to match
                wait(isend(comm, np.array([tag], dtype=np.int32), 1, Datatype.INT32, 0, tag))
            action = {"start": start, "test": test, "wait": wait, "free": request_free}[call]
            if isinstance(outcome, type) and issubclass(outcome, Exception):
                with pytest.raises(outcome):
                    action(request)
            elif call == "test":
                assert action(request) is outcome, (sequence, call)
            else:
                action(request)
            state = next_state
        if state == "active":
            # drain the outstanding receive so it does not linger
            wait(isend(comm, np.array([tag], dtype=np.int32), 1, Datatype.INT32, 0, tag))
            wait(request)
