"""TCP transport: one full-duplex connection per rank pair, framed per envelope."""
from __future__ import annotations

import logging
import socket
import struct
import threading
import time
from typing import Dict, List, Optional, Sequence, Set, Tuple

from schedmpi.errors import BindFailure, FrameError, TransportClosed
from schedmpi.transport.base import Transport
from schedmpi.transport.envelope import HEADER_SIZE, Envelope, decode_header, encode_header

logger = logging.getLogger(__name__)

HELLO_STRUCT = struct.Struct("<I")
CONNECT_TIMEOUT_SECONDS = 30.0
CONNECT_RETRY_SECONDS = 0.05


def parse_address(address: str) -> Tuple[str, int]:
    host, sep, port = address.strip().rpartition(":")
    if not sep or not host:
        raise ValueError(f"address must look like host:port, got {address!r}")
    return host, int(port)


def bind_listener(address: str) -> socket.socket:
    host, port = parse_address(address)
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        listener.bind((host, port))
    except OSError as exc:
        listener.close()
        raise BindFailure(f"cannot bind {address}: {exc}") from exc
    listener.listen(64)
    return listener


def find_free_addresses(size: int, host: str = "127.0.0.1") -> List[str]:
    """Ask the OS for `size` free loopback ports (for process launches)."""
    sockets = []
    try:
        for _ in range(size):
            sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            sock.bind((host, 0))
            sockets.append(sock)
        return [f"{host}:{sock.getsockname()[1]}" for sock in sockets]
    finally:
        for sock in sockets:
            sock.close()


def _recv_exact(sock: socket.socket, length: int) -> Optional[bytes]:
    chunks = []
    got = 0
    while got < length:
        chunk = sock.recv(length - got)
        if not chunk:
            return None
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


class TcpTransport(Transport):
    """Eager mesh: lower rank dials the higher rank, which accepts and reads a hello."""

    def __init__(
        self,
        rank: int,
        addresses: Sequence[str],
        *,
        listener: Optional[socket.socket] = None,
        connect_timeout: float = CONNECT_TIMEOUT_SECONDS,
    ) -> None:
        super().__init__(rank, len(addresses))
        self.addresses = list(addresses)
        self._listener = listener or bind_listener(self.addresses[rank])
        self._peers: Dict[int, socket.socket] = {}
        self._send_locks: Dict[int, threading.Lock] = {}
        self._closed_peers: Set[int] = set()
        self._readers: List[threading.Thread] = []
        self._closing = False
        self._establish(connect_timeout)

    def _establish(self, connect_timeout: float) -> None:
        accept_errors: List[BaseException] = []
        acceptor = threading.Thread(
            target=self._accept_lower_ranks,
            args=(accept_errors, connect_timeout),
            name=f"tcp-accept-{self.rank}",
            daemon=True,
        )
        acceptor.start()
        for peer in range(self.rank + 1, self.size):
            self._register(peer, self._dial(peer, connect_timeout))
        acceptor.join()
        if accept_errors:
            raise TransportClosed(f"rank {self.rank} could not accept peers: {accept_errors[0]}")
        self._listener.close()
        for peer, sock in sorted(self._peers.items()):
            reader = threading.Thread(
                target=self._read_loop, args=(peer, sock), name=f"tcp-read-{self.rank}<-{peer}", daemon=True
            )
            reader.start()
            self._readers.append(reader)
        logger.info("Rank %d connected to %d TCP peers", self.rank, len(self._peers))

    def _accept_lower_ranks(self, errors: List[BaseException], timeout: float) -> None:
        try:
            self._listener.settimeout(timeout)
            for _ in range(self.rank):
                sock, _ = self._listener.accept()
                sock.settimeout(None)
                hello = _recv_exact(sock, HELLO_STRUCT.size)
                if hello is None:
                    raise TransportClosed("peer hung up during hello")
                (peer,) = HELLO_STRUCT.unpack(hello)
                self._register(peer, sock)
        except Exception as exc:
            logger.exception("Rank %d accept failed", self.rank)
            errors.append(exc)

    def _dial(self, peer: int, timeout: float) -> socket.socket:
        host, port = parse_address(self.addresses[peer])
        deadline = time.monotonic() + timeout
        while True:
            try:
                sock = socket.create_connection((host, port), timeout=timeout)
                break
            except OSError as exc:
                if time.monotonic() > deadline:
                    raise TransportClosed(f"rank {self.rank} cannot reach rank {peer} at {host}:{port}") from exc
                time.sleep(CONNECT_RETRY_SECONDS)
        sock.settimeout(None)
        sock.sendall(HELLO_STRUCT.pack(self.rank))
        return sock

    def _register(self, peer: int, sock: socket.socket) -> None:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._peers[peer] = sock
        self._send_locks[peer] = threading.Lock()

    def _read_loop(self, peer: int, sock: socket.socket) -> None:
        try:
            while True:
                header = _recv_exact(sock, HEADER_SIZE)
                if header is None:
                    break
                envelope = decode_header(header)
                payload = _recv_exact(sock, envelope.payload_len) if envelope.payload_len else b""
                if payload is None:
                    raise FrameError(f"peer {peer} closed mid-frame")
                self.inbox.push(envelope, payload)
        except (OSError, FrameError) as exc:
            if not self._closing:
                logger.warning("Rank %d lost connection to rank %d: %s", self.rank, peer, exc)
        self._closed_peers.add(peer)

    def _transmit(self, envelope: Envelope, payload: bytes) -> None:
        if self._closing:
            raise TransportClosed(f"rank {self.rank} transport is closed")
        if envelope.dst == self.rank:
            self.inbox.push(envelope, payload)
            return
        if envelope.dst in self._closed_peers:
            raise TransportClosed(f"rank {envelope.dst} has shut down")
        with self._send_locks[envelope.dst]:
            try:
                self._peers[envelope.dst].sendall(encode_header(envelope) + payload)
            except OSError as exc:
                self._closed_peers.add(envelope.dst)
                raise TransportClosed(f"send to rank {envelope.dst} failed: {exc}") from exc

    def close(self) -> None:
        self._closing = True
        for sock in self._peers.values():
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            sock.close()
        for reader in self._readers:
            reader.join(timeout=5)
