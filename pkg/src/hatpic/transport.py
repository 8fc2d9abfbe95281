"""Byte-stream transports carrying frames between device and host.

One duplex interface, three carriers selected by a config string:

    inproc                  in-process pipe pair (tests, deterministic runs)
    tcp:HOST:PORT           connect to a peer
    tcp-listen:HOST:PORT    accept exactly one peer
    pty                     allocate a pseudo-terminal, expose the slave path
    pty:/dev/pts/N          open an existing pty/serial device path

All reads are non-blocking: read() returns whatever is buffered, possibly
b"". Writers never block on a slow reader; the in-process pipe drops the
oldest bytes once its bound is hit, sockets rely on OS buffering.
"""

from __future__ import annotations

import os
import socket
import threading
from collections import deque

__all__ = ["TransportError", "ByteTransport", "InprocEndpoint", "inproc_pair", "open_transport"]


class TransportError(OSError):
    """Transport could not be opened or has failed."""


class ByteTransport:
    def write(self, data: bytes) -> None:
        raise NotImplementedError

    def read(self, max_bytes: int = 65536) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass


class InprocEndpoint(ByteTransport):
    """One end of an in-process duplex pipe."""

    def __init__(self, capacity: int = 1 << 20):
        self._rx = deque()
        self._rx_size = 0
        self._capacity = capacity
        self._lock = threading.Lock()
        self.peer: "InprocEndpoint | None" = None

    def write(self, data: bytes) -> None:
        if not data:
            return
        peer = self.peer
        if peer is None:
            raise TransportError("inproc endpoint has no peer")
        with peer._lock:
            peer._rx.append(bytes(data))
            peer._rx_size += len(data)
            while peer._rx_size > peer._capacity:
                dropped = peer._rx.popleft()
                peer._rx_size -= len(dropped)

    def read(self, max_bytes: int = 65536) -> bytes:
        with self._lock:
            if not self._rx:
                return b""
            chunks = []
            got = 0
            while self._rx and got < max_bytes:
                chunk = self._rx.popleft()
                self._rx_size -= len(chunk)
                chunks.append(chunk)
                got += len(chunk)
            return b"".join(chunks)


def inproc_pair(capacity: int = 1 << 20) -> tuple[InprocEndpoint, InprocEndpoint]:
    a, b = InprocEndpoint(capacity), InprocEndpoint(capacity)
    a.peer, b.peer = b, a
    return a, b


class SocketTransport(ByteTransport):
    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._sock.setblocking(False)
        try:
            self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        except OSError:
            pass

    def write(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except BlockingIOError:
            # OS buffer full: the peer is stalled; frames are droppable
            pass
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def read(self, max_bytes: int = 65536) -> bytes:
        try:
            data = self._sock.recv(max_bytes)
        except BlockingIOError:
            return b""
        except OSError as exc:
            raise TransportError(str(exc)) from exc
        if data == b"":
            raise TransportError("peer closed the connection")
        return data

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class PtyTransport(ByteTransport):
    """Pseudo-terminal endpoint mimicking a serial port.

    Without a path, allocates a new pty and exposes ``slave_path`` for the
    other side to open (e.g. with a stock serial tool).
    """

    def __init__(self, path: str | None = None):
        if path:
            try:
                self._fd = os.open(path, os.O_RDWR | os.O_NOCTTY | os.O_NONBLOCK)
            except OSError as exc:
                raise TransportError(f"cannot open {path}: {exc}") from exc
            self.slave_path = path
        else:
            master, slave = os.openpty()
            os.set_blocking(master, False)
            self._fd = master
            self._slave_fd = slave
            self.slave_path = os.ttyname(slave)
        import tty

        try:
            tty.setraw(self._fd)
        except Exception:
            pass

    def write(self, data: bytes) -> None:
        try:
            os.write(self._fd, data)
        except BlockingIOError:
            pass
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def read(self, max_bytes: int = 65536) -> bytes:
        try:
            return os.read(self._fd, max_bytes)
        except BlockingIOError:
            return b""
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def close(self) -> None:
        try:
            os.close(self._fd)
        except OSError:
            pass


def open_transport(spec: str, connect_timeout: float = 5.0) -> ByteTransport:
    """Open a transport from its config string (see module docstring).

    ``inproc`` is rejected here: in-process pipes only exist as pairs
    handed out by the code that owns both ends.
    """
    if spec == "inproc":
        raise TransportError("inproc transports are created in-process via inproc_pair()")
    if spec.startswith("tcp-listen:"):
        host, port = _host_port(spec[len("tcp-listen:") :])
        srv = socket.create_server((host, port))
        srv.settimeout(connect_timeout)
        try:
            conn, _ = srv.accept()
        except socket.timeout as exc:
            srv.close()
            raise TransportError(f"no peer connected to {spec}") from exc
        srv.close()
        return SocketTransport(conn)
    if spec.startswith("tcp:"):
        host, port = _host_port(spec[len("tcp:") :])
        try:
            sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {spec}: {exc}") from exc
        sock.settimeout(None)
        return SocketTransport(sock)
    if spec == "pty":
        return PtyTransport()
    if spec.startswith("pty:"):
        return PtyTransport(spec[len("pty:") :])
    raise TransportError(f"unknown transport spec {spec!r}")


def _host_port(rest: str) -> tuple[str, int]:
    host, _, port = rest.rpartition(":")
    if not host:
        host = "127.0.0.1"
    try:
        return host, int(port)
    except ValueError as exc:
        raise TransportError(f"bad host:port in {rest!r}") from exc
