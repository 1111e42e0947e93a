from schedmpi.transport.base import Frame, Inbox, Transport
from schedmpi.transport.envelope import (
    FRAME_MAGIC,
    HEADER_SIZE,
    Datatype,
    Envelope,
    decode_frame,
    decode_header,
    encode_frame,
    encode_header,
)
from schedmpi.transport.inproc_transport import InprocFabric, InprocTransport
from schedmpi.transport.tcp_transport import TcpTransport, bind_listener, find_free_addresses

__all__ = [
    "FRAME_MAGIC",
    "HEADER_SIZE",
    "Datatype",
    "Envelope",
    "Frame",
    "Inbox",
    "InprocFabric",
    "InprocTransport",
    "TcpTransport",
    "Transport",
    "bind_listener",
    "decode_frame",
    "decode_header",
    "encode_frame",
    "encode_header",
    "find_free_addresses",
]
