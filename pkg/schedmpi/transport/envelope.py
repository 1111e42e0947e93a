"""Envelope, datatype codes and the bit-exact TCP frame layout."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Tuple

import numpy as np

from schedmpi.errors import FrameError, LengthMismatch

FRAME_MAGIC = 0x53434845  # "SCHE"
# magic, context, src, dst, tag, dtype, payload_len
HEADER_STRUCT = struct.Struct("<IIIIiIQ")
HEADER_SIZE = HEADER_STRUCT.size


class Datatype(IntEnum):
    BYTE = 0
    INT32 = 1
    INT64 = 2
    FLOAT64 = 3

    @property
    def elem_size(self) -> int:
        return _ELEM_SIZES[self]

    @property
    def numpy_dtype(self) -> np.dtype:
        return _NUMPY_DTYPES[self]


_ELEM_SIZES = {Datatype.BYTE: 1, Datatype.INT32: 4, Datatype.INT64: 8, Datatype.FLOAT64: 8}
_NUMPY_DTYPES = {
    Datatype.BYTE: np.dtype("<u1"),
    Datatype.INT32: np.dtype("<i4"),
    Datatype.INT64: np.dtype("<i8"),
    Datatype.FLOAT64: np.dtype("<f8"),
}


@dataclass(frozen=True)
class Envelope:
    context: int
    src: int
    dst: int
    tag: int
    dtype: Datatype
    payload_len: int

    def validate(self, world_size: int) -> None:
        if not 0 <= self.src < world_size or not 0 <= self.dst < world_size:
            raise FrameError(f"envelope ranks out of range for world of {world_size}: {self}")
        if self.payload_len % Datatype(self.dtype).elem_size:
            raise LengthMismatch(
                f"payload_len {self.payload_len} is not a multiple of {Datatype(self.dtype).name} size"
            )

    @property
    def count(self) -> int:
        return self.payload_len // Datatype(self.dtype).elem_size


def encode_header(envelope: Envelope) -> bytes:
    return HEADER_STRUCT.pack(
        FRAME_MAGIC,
        envelope.context,
        envelope.src,
        envelope.dst,
        envelope.tag,
        int(envelope.dtype),
        envelope.payload_len,
    )


def encode_frame(envelope: Envelope, payload: bytes) -> bytes:
    if len(payload) != envelope.payload_len:
        raise LengthMismatch(f"payload is {len(payload)} bytes, envelope says {envelope.payload_len}")
    return encode_header(envelope) + bytes(payload)


def decode_header(header: bytes) -> Envelope:
    if len(header) != HEADER_SIZE:
        raise FrameError(f"frame header must be {HEADER_SIZE} bytes, got {len(header)}")
    magic, context, src, dst, tag, dtype, payload_len = HEADER_STRUCT.unpack(header)
    if magic != FRAME_MAGIC:
        raise FrameError(f"bad frame magic 0x{magic:08x}")
    try:
        code = Datatype(dtype)
    except ValueError as exc:
        raise FrameError(f"unknown datatype code {dtype}") from exc
    return Envelope(context, src, dst, tag, code, payload_len)


def decode_frame(frame: bytes) -> Tuple[Envelope, bytes]:
    envelope = decode_header(frame[:HEADER_SIZE])
    payload = frame[HEADER_SIZE:]
    if len(payload) != envelope.payload_len:
        raise FrameError(f"frame carries {len(payload)} payload bytes, header says {envelope.payload_len}")
    return envelope, payload
