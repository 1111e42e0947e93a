"""Reduce operations applied as `inoutvec[i] = op(invec[i], inoutvec[i])`."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional

import numpy as np

from schedmpi.errors import InvalidBuffer, LengthMismatch, UnsupportedDatatype
from schedmpi.transport.envelope import Datatype

UserFunction = Callable[[np.ndarray, np.ndarray, int, Datatype], None]


class ReduceOp(Enum):
    SUM = "sum"
    MAX = "max"
    MIN = "min"
    PROD = "prod"
    USER = "user"


_UFUNCS = {
    ReduceOp.SUM: np.add,
    ReduceOp.MAX: np.maximum,
    ReduceOp.MIN: np.minimum,
    ReduceOp.PROD: np.multiply,
}


@dataclass(frozen=True)
class ReduceOpDescriptor:
    op: ReduceOp
    user_fn: Optional[UserFunction] = None

    def __post_init__(self) -> None:
        if self.op is ReduceOp.USER and self.user_fn is None:
            raise ValueError("USER reduce op needs a user_fn")
        if self.op is not ReduceOp.USER and self.user_fn is not None:
            raise ValueError(f"built-in reduce op {self.op.name} takes no user_fn")

    @classmethod
    def user(cls, fn: UserFunction) -> "ReduceOpDescriptor":
        return cls(ReduceOp.USER, fn)


SUM = ReduceOpDescriptor(ReduceOp.SUM)
MAX = ReduceOpDescriptor(ReduceOp.MAX)
MIN = ReduceOpDescriptor(ReduceOp.MIN)
PROD = ReduceOpDescriptor(ReduceOp.PROD)


def as_vector(buffer: Any, dtype: Datatype, *, writable: bool = False) -> np.ndarray:
    """Flat view of an application buffer with the declared element type."""
    array = buffer if isinstance(buffer, np.ndarray) else np.frombuffer(buffer, dtype=dtype.numpy_dtype)
    if array.dtype != dtype.numpy_dtype:
        raise UnsupportedDatatype(f"buffer holds {array.dtype}, expected {dtype.name}")
    if not array.flags.c_contiguous:
        raise InvalidBuffer("buffers must be contiguous")
    if writable and not array.flags.writeable:
        raise InvalidBuffer("buffer is read-only")
    return array.reshape(-1)


def check_operands(invec: np.ndarray, inoutvec: np.ndarray, length: int) -> None:
    if length < 0:
        raise LengthMismatch(f"len must be non-negative, got {length}")
    if invec.size < length or inoutvec.size < length:
        raise LengthMismatch(
            f"len {length} exceeds operand sizes ({invec.size}, {inoutvec.size})"
        )
    if length and np.shares_memory(invec[:length], inoutvec[:length]):
        same_start = invec[:length].__array_interface__["data"][0] == inoutvec[:length].__array_interface__["data"][0]
        if not same_start:
            raise InvalidBuffer("invec and inoutvec partially overlap")


def apply_reduce_op(
    desc: ReduceOpDescriptor, invec: Any, inoutvec: Any, length: int, dtype: Datatype
) -> None:
    source = as_vector(invec, dtype)
    target = as_vector(inoutvec, dtype, writable=True)
    check_operands(source, target, length)
    if desc.op is ReduceOp.USER:
        desc.user_fn(source[:length], target[:length], length, dtype)  # type: ignore[misc]
        return
    if length == 0:
        return
    # integer ufuncs wrap on overflow; float ops are plain IEEE-754 per element
    with np.errstate(over="ignore"):
        _UFUNCS[desc.op](source[:length], target[:length], out=target[:length])
