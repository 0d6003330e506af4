"""Per-node HTTP control agent.

Exposes the engine, metrics, and property registry of one benchmark node
under /api/v1/. All bodies and responses are JSON. Engine conflicts
(backfill already running, a second tuner) surface as 409.
"""

from __future__ import annotations

import json
import logging
import socket
import threading
import urllib.parse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .engine import BOTH, READS, WRITES, Engine, EngineBusyError
from .metrics import MetricsRegistry, SlaPolicy
from .plugins import (
    Plugin,
    PluginError,
    create_plugin,
    descriptor_from_properties,
)
from .properties import PropertyError, PropertySet

log = logging.getLogger(__name__)

API_PREFIX = "/api/v1"
DEFAULT_PORT = 8181


class _ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class BenchAgent:
    """One benchmark node: plugin + engine + metrics + control endpoints."""

    def __init__(
        self,
        plugin_name: str,
        properties: PropertySet | None = None,
        port: int = DEFAULT_PORT,
        host: str = "127.0.0.1",
        hosts: tuple[tuple[str, int], ...] = (),
        seed: int = 0,
        instance_id: str | None = None,
    ):
        self.properties = properties if properties is not None else PropertySet()
        self.host = host
        self.port = port
        self.plugin_name = plugin_name
        self._auto_instance_id = instance_id is None
        self.instance_id = instance_id or f"{socket.gethostname()}:{port}"
        self.metrics = MetricsRegistry()
        descriptor = descriptor_from_properties(plugin_name, self.properties, hosts)
        self.plugin: Plugin = create_plugin(descriptor, self.properties)
        self.engine = Engine(self.plugin, self.properties, self.metrics, base_seed=seed)
        self._tuner_lease = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        self._server_thread: threading.Thread | None = None

    # -- lifecycle -----------------------------------------------------

    def start(self) -> None:
        handler = _build_handler(self)
        self._server = ThreadingHTTPServer((self.host, self.port), handler)
        self._server.daemon_threads = True
        if self.port == 0:
            self.port = self._server.server_address[1]
            if self._auto_instance_id:
                self.instance_id = f"{socket.gethostname()}:{self.port}"
        self._server_thread = threading.Thread(
            target=self._server.serve_forever, name=f"agent-{self.port}", daemon=True
        )
        self._server_thread.start()
        log.info("agent %s listening on %s:%d", self.instance_id, self.host, self.port)

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
        self.properties.stop_file_polling()
        self.engine.close()
        self.plugin.shutdown()

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    # -- endpoint implementations ---------------------------------------

    def node_status(self) -> dict:
        status = self.engine.status()
        status.update(
            {
                "instanceId": self.instance_id,
                "host": self.host,
                "port": self.port,
                "health": "UP",
                "pluginName": self.plugin_name,
                "workers": self.engine.worker_census(),
            }
        )
        return status

    def sla_policy(self) -> SlaPolicy:
        return SlaPolicy.from_properties(self.properties)

    def handle(self, method: str, path: str, query: dict, body: dict | None) -> tuple[int, dict]:
        if not path.startswith(API_PREFIX + "/"):
            raise _ApiError(404, f"unknown endpoint {path}")
        route = path[len(API_PREFIX) + 1 :].rstrip("/")

        if method == "GET" and route == "status":
            return 200, self.node_status()
        if method == "GET" and route == "stats":
            return 200, self.metrics.snapshot(self.sla_policy()).as_dict()
        if method == "GET" and route == "properties":
            return 200, self.properties.effective()

        if method == "POST" and route == "properties":
            if not isinstance(body, dict) or "name" not in body or "value" not in body:
                raise _ApiError(400, 'body must be {"name": ..., "value": ...}')
            try:
                self.properties.set_property(str(body["name"]), str(body["value"]))
            except PropertyError as exc:
                raise _ApiError(400, str(exc)) from exc
            return 200, {"ok": True, "name": body["name"], "value": str(body["value"])}

        if method == "POST" and route == "workload/start":
            which = self._which(query)
            try:
                self.engine.start_workload(which)
            except EngineBusyError as exc:
                raise _ApiError(409, str(exc)) from exc
            return 200, {"ok": True, "phase": self.engine.phase}

        if method == "POST" and route == "workload/stop":
            which = self._which(query)
            self.engine.stop_workload(which)
            return 200, {"ok": True, "phase": self.engine.phase}

        if method == "POST" and route == "backfill":
            if not isinstance(body, dict) or "start" not in body or "end" not in body:
                raise _ApiError(400, 'body must be {"start": ..., "end": ...}')
            try:
                start, end = int(body["start"]), int(body["end"])
            except (TypeError, ValueError):
                raise _ApiError(400, "start and end must be integers") from None
            try:
                self.engine.backfill_async(start, end)
            except EngineBusyError as exc:
                raise _ApiError(409, str(exc)) from exc
            except ValueError as exc:
                raise _ApiError(400, str(exc)) from exc
            return 202, {"ok": True, "started": True, "range": [start, end]}

        if method == "POST" and route == "stats/reset":
            self.metrics.reset()
            return 200, {"ok": True}

        if method == "POST" and route == "tuner/lease":
            if not self._tuner_lease.acquire(blocking=False):
                raise _ApiError(409, "a tuner already holds the rate lease")
            return 200, {"ok": True, "leased": True}

        if method in ("POST", "DELETE") and route == "tuner/release":
            if self._tuner_lease.locked():
                self._tuner_lease.release()
            return 200, {"ok": True, "leased": False}

        raise _ApiError(404, f"unknown endpoint {method} {path}")

    @staticmethod
    def _which(query: dict) -> str:
        which = query.get("which", [BOTH])[0]
        if which not in (READS, WRITES, BOTH):
            raise _ApiError(400, f"which must be reads|writes|both, got {which!r}")
        return which


def _build_handler(agent: BenchAgent):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("agent http: " + fmt, *args)

        def _dispatch(self, method: str):
            parsed = urllib.parse.urlsplit(self.path)
            query = urllib.parse.parse_qs(parsed.query)
            body = None
            length = int(self.headers.get("Content-Length") or 0)
            if length:
                raw = self.rfile.read(length)
                try:
                    body = json.loads(raw)
                except json.JSONDecodeError:
                    self._reply(400, {"error": "request body is not valid JSON"})
                    return
            try:
                status, payload = agent.handle(method, parsed.path, query, body)
            except _ApiError as exc:
                self._reply(exc.status, {"error": exc.message})
                return
            except PluginError as exc:
                self._reply(500, {"error": str(exc)})
                return
            except Exception as exc:  # pragma: no cover - defensive
                log.exception("agent request failed")
                self._reply(500, {"error": f"internal error: {exc}"})
                return
            self._reply(status, payload)

        def _reply(self, status: int, payload: dict):
            data = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_DELETE(self):
            self._dispatch("DELETE")

    return Handler
