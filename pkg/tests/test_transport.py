"""Byte transports: duplex delivery, bounded buffering, spec strings."""

import os
import threading

import pytest

from hatpic.transport import (
    InprocEndpoint,
    TransportError,
    inproc_pair,
    open_transport,
)


class TestInproc:
    def test_duplex_delivery(self):
        a, b = inproc_pair()
        a.write(b"ping")
        b.write(b"pong")
        assert b.read() == b"ping"
        assert a.read() == b"pong"

    def test_read_empty_is_nonblocking(self):
        a, _ = inproc_pair()
        assert a.read() == b""

    def test_preserves_chunk_order(self):
        a, b = inproc_pair()
        for i in range(10):
            a.write(bytes([i]))
        assert b.read() == bytes(range(10))

    def test_bounded_drops_oldest(self):
        a, b = inproc_pair(capacity=8)
        a.write(b"AAAA")
        a.write(b"BBBB")
        a.write(b"CC")  # pushes total to 10 > 8, oldest chunk dropped
        assert b.read() == b"BBBBCC"

    def test_unpaired_endpoint_rejects_write(self):
        end = InprocEndpoint()
        with pytest.raises(TransportError):
            end.write(b"x")

    def test_max_bytes_cap(self):
        a, b = inproc_pair()
        a.write(b"12")
        a.write(b"34")
        first = b.read(max_bytes=1)
        assert first == b"12"  # chunk granularity, at least one chunk
        assert b.read() == b"34"


class TestTcp:
    def test_listen_connect_round_trip(self):
        import socket

        srv = socket.create_server(("127.0.0.1", 0))
        port = srv.getsockname()[1]
        srv.close()

        result = {}

        def listen_side():
            t = open_transport(f"tcp-listen:127.0.0.1:{port}", connect_timeout=5.0)
            result["listen"] = t
            t.write(b"hello")

        th = threading.Thread(target=listen_side)
        th.start()
        client = None
        for _ in range(100):
            try:
                client = open_transport(f"tcp:127.0.0.1:{port}", connect_timeout=0.2)
                break
            except TransportError:
                pass
        th.join()
        assert client is not None
        got = b""
        for _ in range(200):
            got += client.read()
            if got == b"hello":
                break
        assert got == b"hello"
        client.write(b"back")
        got = b""
        for _ in range(200):
            got += result["listen"].read()
            if got == b"back":
                break
        assert got == b"back"
        client.close()
        result["listen"].close()

    def test_connect_refused(self):
        with pytest.raises(TransportError):
            open_transport("tcp:127.0.0.1:1", connect_timeout=0.3)

    def test_bad_spec(self):
        with pytest.raises(TransportError):
            open_transport("carrier-pigeon:coop:7")
        with pytest.raises(TransportError):
            open_transport("tcp:127.0.0.1:notaport")

    def test_inproc_spec_rejected(self):
        with pytest.raises(TransportError):
            open_transport("inproc")


class TestPty:
    def test_allocates_slave_path(self):
        t = open_transport("pty")
        assert t.slave_path.startswith("/dev/")
        fd = os.open(t.slave_path, os.O_RDWR | os.O_NOCTTY | os.O_NONBLOCK)
        try:
            t.write(b"\xaa\x55\x01")
            got = b""
            for _ in range(100):
                try:
                    got += os.read(fd, 64)
                except BlockingIOError:
                    pass
                if got:
                    break
            assert got == b"\xaa\x55\x01"
            os.write(fd, b"\x07")
            back = b""
            for _ in range(100):
                back += t.read()
                if back:
                    break
            assert back == b"\x07"
        finally:
            os.close(fd)
            t.close()

    def test_missing_path_fails(self):
        with pytest.raises(TransportError):
            open_transport("pty:/dev/does-not-exist-424242")
