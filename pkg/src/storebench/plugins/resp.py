"""Wire-level RESP2 key-value client (GET/SET only).

Each worker thread gets its own connection, assigned round-robin across
the descriptor's hosts. Replies handled: simple string, error, integer,
bulk string, and the nil bulk ($-1) which maps to NotFound.
"""

from __future__ import annotations

import itertools
import socket
import threading
import time

from . import (
    FAILURE,
    NOT_FOUND,
    SUCCESS,
    TIMEOUT,
    OpResult,
    Plugin,
    PluginInitError,
    elapsed_us,
    register_plugin,
)
from ..workload import validate_payload

CONNECT_TIMEOUT_SECONDS = 3.0


def encode_command(*args: bytes) -> bytes:
    parts = [b"*%d\r\n" % len(args)]
    for arg in args:
        parts.append(b"$%d\r\n%s\r\n" % (len(arg), arg))
    return b"".join(parts)


class _Connection:
    def __init__(self, host: str, port: int, timeout: float):
        self.sock = socket.create_connection((host, port), timeout=CONNECT_TIMEOUT_SECONDS)
        self.sock.settimeout(timeout)
        self._buffer = b""

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass

    def send(self, payload: bytes) -> None:
        self.sock.sendall(payload)

    def read_line(self) -> bytes:
        while b"\r\n" not in self._buffer:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise ConnectionError("connection closed mid-reply")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\r\n", 1)
        return line

    def read_exact(self, n: int) -> bytes:
        while len(self._buffer) < n:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise ConnectionError("connection closed mid-reply")
            self._buffer += chunk
        data, self._buffer = self._buffer[:n], self._buffer[n:]
        return data

    def read_reply(self):
        """Returns (kind, value) with kind in {simple, error, int, bulk, nil}."""
        line = self.read_line()
        marker, rest = line[:1], line[1:]
        if marker == b"+":
            return "simple", rest
        if marker == b"-":
            return "error", rest
        if marker == b":":
            return "int", int(rest)
        if marker == b"$":
            length = int(rest)
            if length == -1:
                return "nil", None
            data = self.read_exact(length)
            self.read_exact(2)  # trailing CRLF
            return "bulk", data
        raise ConnectionError(f"unsupported RESP reply type {marker!r}")


class RespPlugin(Plugin):
    def __init__(self, descriptor, properties):
        super().__init__(descriptor, properties)
        if not descriptor.hosts:
            raise PluginInitError("resp plugin requires at least one host")
        self._hosts = descriptor.hosts
        self._next_host = itertools.count()
        self._local = threading.local()
        self._open_connections: set[_Connection] = set()
        self._conn_lock = threading.Lock()

    def init(self) -> None:
        # fail fast if nothing is listening
        host, port = self._hosts[0]
        try:
            probe = socket.create_connection((host, port), timeout=CONNECT_TIMEOUT_SECONDS)
            probe.close()
        except OSError as exc:
            raise PluginInitError(f"cannot connect to {host}:{port}: {exc}") from exc

    def shutdown(self) -> None:
        super().shutdown()
        with self._conn_lock:
            connections = list(self._open_connections)
            self._open_connections.clear()
        for conn in connections:
            conn.close()

    def _connection(self) -> _Connection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            host, port = self._hosts[next(self._next_host) % len(self._hosts)]
            conn = _Connection(host, port, self.op_timeout_seconds)
            self._local.conn = conn
            with self._conn_lock:
                self._open_connections.add(conn)
        return conn

    def _drop_connection(self) -> None:
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            self._local.conn = None
            with self._conn_lock:
                self._open_connections.discard(conn)
            conn.close()

    def _roundtrip(self, command: bytes):
        conn = self._connection()
        conn.send(command)
        return conn.read_reply()

    def write(self, key: str, value: bytes) -> OpResult:
        self._check_open()
        start = time.perf_counter()
        try:
            kind, reply = self._roundtrip(encode_command(b"SET", key.encode(), value))
        except socket.timeout:
            self._drop_connection()
            return OpResult(TIMEOUT, elapsed_us(start), detail="deadline exceeded")
        except (OSError, ConnectionError, ValueError) as exc:
            self._drop_connection()
            return OpResult(FAILURE, elapsed_us(start), detail=str(exc))
        if kind == "error":
            return OpResult(FAILURE, elapsed_us(start), detail=reply.decode(errors="replace"))
        return OpResult(SUCCESS, elapsed_us(start))

    def read(self, key: str) -> OpResult:
        self._check_open()
        start = time.perf_counter()
        try:
            kind, reply = self._roundtrip(encode_command(b"GET", key.encode()))
        except socket.timeout:
            self._drop_connection()
            return OpResult(TIMEOUT, elapsed_us(start), detail="deadline exceeded")
        except (OSError, ConnectionError, ValueError) as exc:
            self._drop_connection()
            return OpResult(FAILURE, elapsed_us(start), detail=str(exc))
        if kind == "nil":
            return OpResult(NOT_FOUND, elapsed_us(start))
        if kind == "error":
            return OpResult(FAILURE, elapsed_us(start), detail=reply.decode(errors="replace"))
        if kind != "bulk":
            return OpResult(FAILURE, elapsed_us(start), detail=f"unexpected {kind} reply")
        if not validate_payload(reply):
            return OpResult(FAILURE, elapsed_us(start), detail="corruption")
        return OpResult(SUCCESS, elapsed_us(start), value=reply)


register_plugin("resp", RespPlugin)
