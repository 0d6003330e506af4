import socket
import sys
import threading

import pytest

from storebench.agent import BenchAgent
from storebench.properties import PropertySet


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(acceptance, "CRITERION_LINES", None) if acceptance else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture
def make_agent():
    """Factory for in-process agents; everything is torn down at test end."""
    agents: list[BenchAgent] = []

    def build(plugin="memstore", defaults=None, seed=0, instance_id=None, **plugin_params):
        props = PropertySet(defaults=defaults or {})
        for key, value in plugin_params.items():
            # double underscore spells the dot of nested param names
            props.set_defaults({f"plugin.{plugin}.{key.replace('__', '.')}": str(value)})
        agent = BenchAgent(
            plugin_name=plugin,
            properties=props,
            port=0,
            seed=seed,
            instance_id=instance_id,
        )
        agent.start()
        agents.append(agent)
        return agent

    yield build
    for agent in agents:
        try:
            agent.stop()
        except Exception:
            pass


class RespServer:
    """Minimal RESP2 key-value server for loopback plugin tests."""

    def __init__(self, host="127.0.0.1", port=0):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(32)
        self.host, self.port = self._sock.getsockname()
        self.store: dict[bytes, bytes] = {}
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def close(self):
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            thread = threading.Thread(target=self._serve, args=(conn,), daemon=True)
            thread.start()
            self._threads.append(thread)

    def _serve(self, conn: socket.socket):
        buffer = b""

        def read_line():
            nonlocal buffer
            while b"\r\n" not in buffer:
                chunk = conn.recv(4096)
                if not chunk:
                    raise ConnectionError
                buffer += chunk
            line, buffer = buffer.split(b"\r\n", 1)
            return line

        def read_exact(n):
            nonlocal buffer
            while len(buffer) < n:
                chunk = conn.recv(4096)
                if not chunk:
                    raise ConnectionError
                buffer += chunk
            data, buffer = buffer[:n], buffer[n:]
            return data

        try:
            while not self._stop.is_set():
                header = read_line()
                if not header.startswith(b"*"):
                    conn.sendall(b"-ERR expected array\r\n")
                    continue
                args = []
                for _ in range(int(header[1:])):
                    length_line = read_line()
                    assert length_line.startswith(b"$")
                    args.append(read_exact(int(length_line[1:])))
                    read_exact(2)
                command = args[0].upper()
                if command == b"SET" and len(args) == 3:
                    with self._lock:
                        self.store[args[1]] = args[2]
                    conn.sendall(b"+OK\r\n")
                elif command == b"GET" and len(args) == 2:
                    with self._lock:
                        value = self.store.get(args[1])
                    if value is None:
                        conn.sendall(b"$-1\r\n")
                    else:
                        conn.sendall(b"$%d\r\n%s\r\n" % (len(value), value))
                elif command == b"PING":
                    conn.sendall(b"+PONG\r\n")
                else:
                    conn.sendall(b"-ERR unknown command\r\n")
        except (ConnectionError, OSError):
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass


@pytest.fixture
def resp_server():
    server = RespServer()
    yield server
    server.close()
