"""WebSocket mirror of the topic bus for the operator console.

Outbound: every bus message, as the same JSON line the bus carries.
Inbound: operator messages, routed to a callback:
  {"topic": "operator/torque", "tau": <N*m>}
  {"topic": "operator/params", "<key>": <value>, ...}

Slow clients get a bounded queue; when it overflows they are dropped,
same policy as the TCP bus.
"""

from __future__ import annotations

import json
import logging
import queue
import threading

from websockets.sync.server import serve

__all__ = ["WsHub"]

log = logging.getLogger("hatpic.ws")

CLIENT_QUEUE_LIMIT = 1024


class WsHub:
    def __init__(self, host: str, port: int, on_message=None):
        self.on_message = on_message  # callable(dict) -> None, may raise ValueError
        self._clients: dict = {}  # connection -> outbound Queue
        self._lock = threading.Lock()
        self._server = serve(self._handler, host, port)
        self.host, self.port = self._server.socket.getsockname()[:2]
        self._thread: threading.Thread | None = None
        self.dropped_clients = 0

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True, name="ws-hub")
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        with self._lock:
            queues = list(self._clients.values())
            self._clients.clear()
        for q in queues:
            q.put(None)
        if self._thread is not None:
            self._thread.join(timeout=2.0)

    def client_count(self) -> int:
        with self._lock:
            return len(self._clients)

    def broadcast(self, line: str) -> None:
        """Queue a JSON line (no trailing newline needed) to every client."""
        line = line.rstrip("\n")
        with self._lock:
            clients = list(self._clients.items())
        for conn, q in clients:
            try:
                q.put_nowait(line)
            except queue.Full:
                self.dropped_clients += 1
                self._detach(conn)
                try:
                    conn.close()
                except OSError:
                    pass

    def _detach(self, conn) -> None:
        with self._lock:
            q = self._clients.pop(conn, None)
        if q is not None:
            q.put(None)

    def _handler(self, conn) -> None:
        q: queue.Queue = queue.Queue(maxsize=CLIENT_QUEUE_LIMIT)
        with self._lock:
            self._clients[conn] = q
        writer = threading.Thread(target=self._writer, args=(conn, q), daemon=True)
        writer.start()
        try:
            for message in conn:
                self._route(conn, message)
        except Exception:
            pass
        finally:
            self._detach(conn)
            writer.join(timeout=1.0)

    def _writer(self, conn, q: queue.Queue) -> None:
        while True:
            item = q.get()
            if item is None:
                return
            try:
                conn.send(item)
            except Exception:
                self._detach(conn)
                return

    def _route(self, conn, message) -> None:
        if isinstance(message, bytes):
            self._reply_err(conn, "binary frames not supported")
            return
        try:
            body = json.loads(message)
            if not isinstance(body, dict) or not isinstance(body.get("topic"), str):
                raise ValueError("expected an object with a 'topic' string")
        except (json.JSONDecodeError, ValueError) as exc:
            self._reply_err(conn, str(exc))
            return
        if self.on_message is None:
            return
        try:
            self.on_message(body)
        except (ValueError, TypeError) as exc:
            self._reply_err(conn, str(exc))

    def _reply_err(self, conn, reason: str) -> None:
        log.debug("ws client error: %s", reason)
        try:
            conn.send(json.dumps({"error": reason}))
        except Exception:
            pass
