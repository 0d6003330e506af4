"""Cluster coordinator: the single entry point over many agents.

Discovers nodes from a service-registry URL or a static host list, fans
commands out to every healthy node concurrently, and aggregates node
statistics (counts add, percentiles merge by summing histogram buckets,
never by averaging percentile values).
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
import time
import urllib.parse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from . import httpjson
from .agent import API_PREFIX
from .metrics import merge_stats_dicts
from .plugins import parse_hosts

log = logging.getLogger(__name__)

UP = "UP"
DOWN = "DOWN"

STATUS_PROBE_TIMEOUT = 3.0
FANOUT_TIMEOUT = 10.0


class DiscoveryError(Exception):
    pass


class RegistryParseError(DiscoveryError):
    pass


class NoTargetableNodesError(Exception):
    pass


@dataclass
class NodeStatus:
    instance_id: str
    host: str
    port: int
    health: str = DOWN
    phase: str = ""
    plugin_name: str = ""

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def as_dict(self) -> dict:
        return {
            "instanceId": self.instance_id,
            "host": self.host,
            "port": self.port,
            "health": self.health,
            "phase": self.phase,
            "pluginName": self.plugin_name,
        }


@dataclass
class ClusterView:
    cluster_name: str
    nodes: list[NodeStatus] = field(default_factory=list)
    source: str = ""
    refreshed_at: float = 0.0
    stale: bool = False
    stale_reason: str | None = None

    def targetable(self) -> list[NodeStatus]:
        return [node for node in self.nodes if node.health == UP]

    def as_dict(self) -> dict:
        return {
            "clusterName": self.cluster_name,
            "source": self.source,
            "refreshedAt": self.refreshed_at,
            "stale": self.stale,
            "staleReason": self.stale_reason,
            "nodes": [node.as_dict() for node in self.nodes],
        }


@dataclass
class FanoutOutcome:
    ok: bool
    status: int | None = None
    response: dict | None = None
    error: str | None = None

    def as_dict(self) -> dict:
        return {"ok": self.ok, "status": self.status, "response": self.response, "error": self.error}


def parse_registry_json(document: dict) -> tuple[str, list[NodeStatus]]:
    """Extract (cluster name, nodes) from a service-registry response.

    Expected shape: {"application": {"name": ..., "instance": [
    {"instanceId": ..., "hostName": ..., "port": {"$": n}, "status": "UP"}]}}.
    Anything beyond those fields is ignored.
    """
    try:
        application = document["application"]
        name = application.get("name", "")
        instances = application["instance"]
        if isinstance(instances, dict):  # single-instance shorthand
            instances = [instances]
        nodes = []
        for instance in instances:
            port = instance["port"]
            port_number = int(port["$"] if isinstance(port, dict) else port)
            nodes.append(
                NodeStatus(
                    instance_id=str(instance["instanceId"]),
                    host=str(instance["hostName"]),
                    port=port_number,
                    health=str(instance.get("status", DOWN)),
                )
            )
        return name, nodes
    except (KeyError, TypeError, ValueError) as exc:
        raise RegistryParseError(f"registry JSON missing expected fields: {exc}") from exc


class Coordinator:
    """Discovers agents from ``source`` and runs cluster-wide commands.

    ``source`` is either an http(s) registry URL returning the registry
    JSON, or a comma-separated ``host:port`` list probed directly.
    """

    def __init__(self, source: str, probe_timeout: float = STATUS_PROBE_TIMEOUT):
        self.source = source
        self.probe_timeout = probe_timeout
        self.view = ClusterView(cluster_name=source, source=source)
        self._lock = threading.Lock()

    # -- discovery -------------------------------------------------------

    def discover(self, probe: bool = True) -> ClusterView:
        """Refresh the cluster view; on registry failure the previous
        view is served with the stale flag set."""
        if self.source.startswith(("http://", "https://")):
            return self._discover_registry(probe)
        return self._discover_static()

    def _discover_registry(self, probe: bool) -> ClusterView:
        try:
            document = httpjson.get_json(self.source, timeout=self.probe_timeout)
            name, nodes = parse_registry_json(document)
        except (httpjson.RequestError, RegistryParseError) as exc:
            with self._lock:
                self.view.stale = True
                self.view.stale_reason = str(exc)
                log.warning("discovery failed, serving stale view: %s", exc)
                return self.view
        if probe:
            self._probe_nodes([n for n in nodes if n.health == UP])
        view = ClusterView(
            cluster_name=name or self.source,
            nodes=nodes,
            source=self.source,
            refreshed_at=time.time(),
            stale=False,
        )
        with self._lock:
            self.view = view
        return view

    def _discover_static(self) -> ClusterView:
        nodes = [
            NodeStatus(instance_id=f"{host}:{port}", host=host, port=port)
            for host, port in parse_hosts(self.source)
        ]
        self._probe_nodes(nodes, mark_health=True)
        view = ClusterView(
            cluster_name=self.source,
            nodes=nodes,
            source=self.source,
            refreshed_at=time.time(),
            stale=False,
        )
        with self._lock:
            self.view = view
        return view

    def _probe_nodes(self, nodes: list[NodeStatus], mark_health: bool = False) -> None:
        def probe(node: NodeStatus) -> None:
            try:
                status = httpjson.get_json(
                    f"{node.base_url}{API_PREFIX}/status", timeout=self.probe_timeout
                )
                node.phase = status.get("phase", "")
                node.plugin_name = status.get("pluginName", "")
                node.instance_id = status.get("instanceId", node.instance_id)
                if mark_health:
                    node.health = status.get("health", UP)
            except httpjson.RequestError:
                if mark_health:
                    node.health = DOWN

        if not nodes:
            return
        with ThreadPoolExecutor(max_workers=min(16, len(nodes))) as pool:
            list(pool.map(probe, nodes))

    # -- command fan-out ---------------------------------------------------

    def fanout(
        self,
        method: str,
        path: str,
        body: dict | None = None,
        params: dict | None = None,
        timeout: float = FANOUT_TIMEOUT,
    ) -> dict[str, FanoutOutcome]:
        """Send one agent request to every UP node concurrently.

        Partial failures never roll back successes; the outcome map holds
        one entry per node. Raises NoTargetableNodesError when the UP set
        is empty and an aggregate error when every node fails.
        """
        targets = self.view.targetable()
        if not targets:
            raise NoTargetableNodesError("no targetable nodes (health UP) in cluster view")

        def send(node: NodeStatus) -> tuple[str, FanoutOutcome]:
            url = f"{node.base_url}{API_PREFIX}{path}"
            try:
                response = httpjson.request_json(method, url, body=body, params=params, timeout=timeout)
                return node.instance_id, FanoutOutcome(ok=True, status=200, response=response)
            except httpjson.RequestError as exc:
                return node.instance_id, FanoutOutcome(
                    ok=False, status=exc.status, error=str(exc)
                )

        with ThreadPoolExecutor(max_workers=min(16, len(targets))) as pool:
            outcomes = dict(pool.map(send, targets))
        if all(not outcome.ok for outcome in outcomes.values()):
            failures = "; ".join(f"{nid}: {o.error}" for nid, o in outcomes.items())
            raise DiscoveryError(f"all nodes failed: {failures}")
        return outcomes

    # -- statistics ----------------------------------------------------------

    def aggregate_stats(self) -> dict:
        """Cluster-wide stats: per-node snapshots plus a merged view.

        Nodes that fail to respond are listed under ``missing`` rather
        than aborting the aggregate.
        """
        targets = self.view.targetable()
        per_node: dict[str, dict] = {}
        missing: list[str] = []

        def fetch(node: NodeStatus) -> None:
            try:
                per_node[node.instance_id] = httpjson.get_json(
                    f"{node.base_url}{API_PREFIX}/stats", timeout=self.probe_timeout
                )
            except httpjson.RequestError:
                missing.append(node.instance_id)

        if targets:
            with ThreadPoolExecutor(max_workers=min(16, len(targets))) as pool:
                list(pool.map(fetch, targets))
        aggregate = merge_stats_dicts(list(per_node.values())) if per_node else None
        return {"aggregate": aggregate, "nodes": per_node, "missing": sorted(missing)}

    def node_by_id(self, instance_id: str) -> NodeStatus | None:
        for node in self.view.nodes:
            if node.instance_id == instance_id:
                return node
        return None


# ---------------------------------------------------------------------------
# coordinator HTTP server (UI backend)


class CoordinatorServer:
    """Serves the dashboard assets and a cluster-level API that the UI
    (or anything else) can use instead of talking to agents directly."""

    def __init__(
        self,
        coordinator: Coordinator,
        port: int = 8080,
        host: str = "127.0.0.1",
        ui_dir: str | Path | None = None,
    ):
        self.coordinator = coordinator
        self.host = host
        self.port = port
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        handler = _build_coordinator_handler(self)
        self._server = ThreadingHTTPServer((self.host, self.port), handler)
        self._server.daemon_threads = True
        if self.port == 0:
            self.port = self._server.server_address[1]
        self._thread = threading.Thread(
            target=self._server.serve_forever, name=f"coordinator-{self.port}", daemon=True
        )
        self._thread.start()
        log.info("coordinator listening on %s:%d", self.host, self.port)

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    # -- API ----------------------------------------------------------------

    def handle_api(self, method: str, path: str, query: dict, body: dict | None) -> tuple[int, dict]:
        if method == "GET" and path == "/cluster":
            view = self.coordinator.discover()
            return 200, view.as_dict()
        if method == "GET" and path == "/cluster/stats":
            return 200, self.coordinator.aggregate_stats()

        if path.startswith("/cluster/"):
            agent_path = path[len("/cluster") :]
            try:
                outcomes = self.coordinator.fanout(method, agent_path, body=body, params=_flat(query))
            except NoTargetableNodesError as exc:
                return 409, {"error": str(exc)}
            except DiscoveryError as exc:
                return 502, {"error": str(exc)}
            return 200, {nid: outcome.as_dict() for nid, outcome in outcomes.items()}

        if path.startswith("/nodes/"):
            rest = path[len("/nodes/") :]
            instance_id, _, agent_path = rest.partition("/")
            node = self.coordinator.node_by_id(urllib.parse.unquote(instance_id))
            if node is None:
                return 404, {"error": f"unknown node {instance_id!r}"}
            url = f"{node.base_url}{API_PREFIX}/{agent_path}"
            try:
                response = httpjson.request_json(
                    method, url, body=body, params=_flat(query), timeout=FANOUT_TIMEOUT
                )
                return 200, response if isinstance(response, dict) else {"response": response}
            except httpjson.RequestError as exc:
                return exc.status or 502, {"error": str(exc)}

        return 404, {"error": f"unknown endpoint {method} {path}"}

    def read_asset(self, path: str) -> tuple[bytes, str] | None:
        if self.ui_dir is None:
            return None
        relative = path[len("/ui") :].lstrip("/") or "index.html"
        target = (self.ui_dir / relative).resolve()
        try:
            target.relative_to(self.ui_dir.resolve())
        except ValueError:
            return None
        if not target.is_file():
            return None
        content_type = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        return target.read_bytes(), content_type


def _flat(query: dict) -> dict:
    return {key: values[0] for key, values in query.items() if values}


def _build_coordinator_handler(server: CoordinatorServer):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("coordinator http: " + fmt, *args)

        def _dispatch(self, method: str):
            parsed = urllib.parse.urlsplit(self.path)
            if parsed.path == "/" or parsed.path == "/ui":
                self._redirect("/ui/")
                return
            if parsed.path.startswith("/ui/") and method == "GET":
                asset = server.read_asset(parsed.path)
                if asset is None:
                    self._reply_bytes(404, b"not found", "text/plain")
                else:
                    self._reply_bytes(200, asset[0], asset[1])
                return
            if parsed.path.startswith(API_PREFIX):
                query = urllib.parse.parse_qs(parsed.query)
                body = None
                length = int(self.headers.get("Content-Length") or 0)
                if length:
                    try:
                        body = json.loads(self.rfile.read(length))
                    except json.JSONDecodeError:
                        self._reply_json(400, {"error": "request body is not valid JSON"})
                        return
                try:
                    status, payload = server.handle_api(
                        method, parsed.path[len(API_PREFIX) :], query, body
                    )
                except Exception as exc:  # pragma: no cover - defensive
                    log.exception("coordinator request failed")
                    status, payload = 500, {"error": str(exc)}
                self._reply_json(status, payload)
                return
            self._reply_json(404, {"error": f"unknown path {parsed.path}"})

        def _redirect(self, location: str):
            self.send_response(302)
            self.send_header("Location", location)
            self.send_header("Content-Length", "0")
            self.end_headers()

        def _reply_json(self, status: int, payload):
            self._reply_bytes(status, json.dumps(payload).encode(), "application/json")

        def _reply_bytes(self, status: int, data: bytes, content_type: str):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
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
