"""Minimal topic bus: newline-delimited JSON over TCP.

Stands in for a full robot middleware so the repo is self-contained. One
message is one line of UTF-8 JSON, ``{"topic": ..., "t": ..., "body":
{...}}``. Clients subscribe by sending ``SUB <topic-pattern>\\n`` (shell
glob patterns, e.g. ``robot/*``); any JSON line a client sends is
published to everyone. There is no replay: a subscriber only sees
messages published after its SUB was processed.

Well-known topics: joystick/state, robot/ref, robot/state, bridge/diag.
The schema is documented in docs/bus.md.
"""

from __future__ import annotations

import json
import math
import socket
import threading
from dataclasses import dataclass
from fnmatch import fnmatchcase
from queue import Empty, Full, Queue

__all__ = ["BusError", "BusMessage", "TopicBus", "TcpBusServer", "BusClient"]

CLIENT_QUEUE_LIMIT = 1024  # messages buffered per slow subscriber before disconnect


class BusError(ValueError):
    """Malformed bus message or subscription."""


def _check_body(value, path: str) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            if not isinstance(k, str):
                raise BusError(f"{path}: keys must be strings")
            _check_body(v, f"{path}.{k}")
    elif isinstance(value, bool) or value is None or isinstance(value, str):
        pass
    elif isinstance(value, (int, float)):
        if not math.isfinite(value):
            raise BusError(f"{path}: numbers must be finite, got {value!r}")
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _check_body(v, f"{path}[{i}]")
    else:
        raise BusError(f"{path}: unsupported value type {type(value).__name__}")


@dataclass(frozen=True)
class BusMessage:
    topic: str
    t: float  # s
    body: dict

    def __post_init__(self):
        if not self.topic or not isinstance(self.topic, str):
            raise BusError("topic must be a non-empty string")
        if not math.isfinite(self.t):
            raise BusError(f"t must be finite, got {self.t!r}")
        if not isinstance(self.body, dict):
            raise BusError("body must be a mapping")
        _check_body(self.body, "body")

    def to_line(self) -> bytes:
        obj = {"topic": self.topic, "t": self.t, "body": self.body}
        return (json.dumps(obj, separators=(",", ":")) + "\n").encode()

    @classmethod
    def from_line(cls, line: bytes | str) -> "BusMessage":
        try:
            obj = json.loads(line)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise BusError(f"not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise BusError("message must be a JSON object")
        try:
            return cls(topic=obj["topic"], t=float(obj["t"]), body=obj["body"])
        except KeyError as exc:
            raise BusError(f"missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise BusError(str(exc)) from exc


class TopicBus:
    """In-process publish/subscribe core.

    Callbacks run synchronously in the publisher's thread; subscribers
    that need decoupling (the TCP server) queue internally.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._subs: list[tuple[str, object]] = []
        self.published = 0

    def subscribe(self, pattern: str, callback) -> object:
        if not pattern:
            raise BusError("empty topic pattern")
        handle = (pattern, callback)
        with self._lock:
            self._subs.append(handle)
        return handle

    def unsubscribe(self, handle) -> None:
        with self._lock:
            try:
                self._subs.remove(handle)
            except ValueError:
                pass

    def publish(self, msg: BusMessage) -> None:
        with self._lock:
            subs = list(self._subs)
        self.published += 1
        for pattern, callback in subs:
            if fnmatchcase(msg.topic, pattern):
                callback(msg)


class _Client:
    def __init__(self, sock: socket.socket, addr):
        self.sock = sock
        self.addr = addr
        self.patterns: list[str] = []
        self.lock = threading.Lock()
        self.queue: Queue = Queue(maxsize=CLIENT_QUEUE_LIMIT)
        self.alive = True

    def wants(self, topic: str) -> bool:
        with self.lock:
            return any(fnmatchcase(topic, p) for p in self.patterns)

    def kill(self) -> None:
        self.alive = False
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class TcpBusServer:
    """Exposes a TopicBus on a TCP listen address.

    Per client: a reader thread (SUB lines and publishes) and a writer
    thread draining a bounded queue. A subscriber that stalls past the
    queue bound is disconnected; nobody else is affected.
    """

    def __init__(self, bus: TopicBus, host: str = "127.0.0.1", port: int = 0):
        self.bus = bus
        self._server = socket.create_server((host, port))
        self.host, self.port = self._server.getsockname()[:2]
        self._clients: set[_Client] = set()
        self._clients_lock = threading.Lock()
        self._stop = threading.Event()
        self._sub_handle = bus.subscribe("*", self._fanout)
        self.malformed = 0
        self.dropped_clients = 0
        self._accept_thread = threading.Thread(target=self._accept_main, daemon=True)

    def start(self) -> None:
        self._accept_thread.start()

    def stop(self) -> None:
        self._stop.set()
        self.bus.unsubscribe(self._sub_handle)
        # closing the listener does not interrupt a blocked accept(); poke it
        try:
            host = "127.0.0.1" if self.host in ("", "0.0.0.0", "::") else self.host
            with socket.create_connection((host, self.port), timeout=0.5):
                pass
        except OSError:
            pass
        try:
            self._server.close()
        except OSError:
            pass
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            c.kill()
        self._accept_thread.join(timeout=2.0)

    def _accept_main(self) -> None:
        while not self._stop.is_set():
            try:
                sock, addr = self._server.accept()
            except OSError:
                return
            if self._stop.is_set():
                sock.close()
                return
            # bound kernel-side buffering so the queue limit, not the OS,
            # decides when a stalled subscriber gets cut loose
            try:
                sock.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, 1 << 16)
            except OSError:
                pass
            client = _Client(sock, addr)
            with self._clients_lock:
                self._clients.add(client)
            threading.Thread(target=self._reader_main, args=(client,), daemon=True).start()
            threading.Thread(target=self._writer_main, args=(client,), daemon=True).start()

    def _drop(self, client: _Client) -> None:
        with self._clients_lock:
            self._clients.discard(client)
        client.kill()

    def _fanout(self, msg: BusMessage) -> None:
        line = msg.to_line()
        with self._clients_lock:
            clients = list(self._clients)
        for client in clients:
            if not client.alive or not client.wants(msg.topic):
                continue
            try:
                client.queue.put_nowait(line)
            except Full:
                self.dropped_clients += 1
                self._drop(client)

    def _writer_main(self, client: _Client) -> None:
        while client.alive and not self._stop.is_set():
            try:
                line = client.queue.get(timeout=0.2)
            except Empty:
                continue
            try:
                client.sock.sendall(line)
            except OSError:
                self._drop(client)
                return

    def _reader_main(self, client: _Client) -> None:
        try:
            reader = client.sock.makefile("rb")
            for raw in reader:
                line = raw.strip()
                if not line:
                    continue
                if line.startswith(b"SUB"):
                    parts = line.split(None, 1)
                    if len(parts) != 2 or not parts[1]:
                        self._reply_err(client, "usage: SUB <topic-pattern>")
                        continue
                    with client.lock:
                        client.patterns.append(parts[1].decode("utf-8", "replace"))
                    continue
                try:
                    msg = BusMessage.from_line(line)
                except BusError as exc:
                    self.malformed += 1
                    self._reply_err(client, str(exc))
                    continue
                self.bus.publish(msg)
        except OSError:
            pass
        finally:
            self._drop(client)

    @staticmethod
    def _reply_err(client: _Client, reason: str) -> None:
        try:
            client.queue.put_nowait(f"ERR {reason}\n".encode())
        except Full:
            pass


class BusClient:
    """Blocking convenience client for tests, demos and external tools."""

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self._reader = self.sock.makefile("rb")

    def subscribe(self, pattern: str) -> None:
        self.sock.sendall(f"SUB {pattern}\n".encode())

    def publish(self, msg: BusMessage) -> None:
        self.sock.sendall(msg.to_line())

    def send_raw(self, line: bytes) -> None:
        self.sock.sendall(line)

    def recv(self, timeout: float | None = None) -> BusMessage | None:
        """Next bus message, or None on timeout. ERR replies raise BusError."""
        if timeout is not None:
            self.sock.settimeout(timeout)
        try:
            raw = self._reader.readline()
        except socket.timeout:
            return None
        if not raw:
            raise ConnectionError("bus server closed the connection")
        if raw.startswith(b"ERR"):
            raise BusError(raw.decode("utf-8", "replace").strip())
        return BusMessage.from_line(raw)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass
