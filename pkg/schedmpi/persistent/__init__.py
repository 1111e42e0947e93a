from schedmpi.persistent.persistent_requests import (
    LocalOpRequest,
    PersistentRequest,
    RecvRequest,
    RequestKind,
    RequestState,
    SendRequest,
    Status,
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
from schedmpi.persistent.reduce_ops import (
    MAX,
    MIN,
    PROD,
    SUM,
    ReduceOp,
    ReduceOpDescriptor,
    apply_reduce_op,
)

__all__ = [
    "MAX",
    "MIN",
    "PROD",
    "SUM",
    "LocalOpRequest",
    "PersistentRequest",
    "RecvRequest",
    "ReduceOp",
    "ReduceOpDescriptor",
    "RequestKind",
    "RequestState",
    "SendRequest",
    "Status",
    "apply_reduce_op",
    "irecv",
    "isend",
    "recv_init",
    "request_free",
    "send_init",
    "start",
    "startall",
    "test",
    "wait",
    "waitall",
]
