"""Client-driver abstraction: a plugin connects to one system under test
and serves single-key reads and writes, reporting per-op outcomes."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

from ..properties import PropertySet

SUCCESS = "Success"
NOT_FOUND = "NotFound"
FAILURE = "Failure"
TIMEOUT = "Timeout"

DEFAULT_OP_TIMEOUT_SECONDS = 5.0


class PluginError(Exception):
    pass


class PluginInitError(PluginError):
    """Connection or configuration failure while bringing a plugin up."""


class UnknownPluginError(PluginError):
    def __init__(self, name: str, known: list[str]):
        super().__init__(f"unknown plugin {name!r}; available: {', '.join(sorted(known))}")
        self.name = name
        self.known = sorted(known)


class PluginShutdownError(PluginError):
    def __init__(self):
        super().__init__("plugin shut down")


@dataclass(frozen=True)
class PluginDescriptor:
    """Registry identity plus connection config for one plugin instance."""

    name: str
    hosts: tuple[tuple[str, int], ...] = ()
    params: dict[str, str] = field(default_factory=dict)

    def param(self, key: str, default: str | None = None) -> str | None:
        return self.params.get(key, default)

    def param_float(self, key: str, default: float) -> float:
        raw = self.params.get(key)
        return float(raw) if raw is not None else default

    def param_int(self, key: str, default: int) -> int:
        raw = self.params.get(key)
        return int(raw) if raw is not None else default


@dataclass
class OpResult:
    status: str
    latency_us: int
    detail: str | None = None
    cache_hit: bool | None = None
    value: bytes | None = None


class Plugin:
    """Base driver. Handles are shared by all workers; implementations
    must tolerate concurrent reads/writes and a shutdown racing them."""

    declares_cache = False

    def __init__(self, descriptor: PluginDescriptor, properties: PropertySet):
        self.descriptor = descriptor
        self.properties = properties
        self._closed = threading.Event()
        self.op_timeout_seconds = descriptor.param_float(
            "opTimeoutSeconds", DEFAULT_OP_TIMEOUT_SECONDS
        )

    # lifecycle -----------------------------------------------------------

    def init(self) -> None:
        """Establish connections; raise PluginInitError to fail fast."""

    def shutdown(self) -> None:
        """Idempotent; subsequent read/write raise PluginShutdownError."""
        self._closed.set()

    @property
    def closed(self) -> bool:
        return self._closed.is_set()

    def _check_open(self) -> None:
        if self._closed.is_set():
            raise PluginShutdownError()

    # data path ------------------------------------------------------------

    def read(self, key: str) -> OpResult:
        raise NotImplementedError

    def write(self, key: str, value: bytes) -> OpResult:
        raise NotImplementedError


def elapsed_us(start: float) -> int:
    return max(0, int((time.perf_counter() - start) * 1_000_000))


_REGISTRY: dict[str, type[Plugin]] = {}


def register_plugin(name: str, cls: type[Plugin]) -> None:
    _REGISTRY[name] = cls


def available_plugins() -> list[str]:
    return sorted(_REGISTRY)


def create_plugin(descriptor: PluginDescriptor, properties: PropertySet) -> Plugin:
    """Instantiate and initialize the named plugin; the returned handle
    is ready to serve operations."""
    try:
        cls = _REGISTRY[descriptor.name.split(":", 1)[0]]
    except KeyError:
        raise UnknownPluginError(descriptor.name, list(_REGISTRY)) from None
    plugin = cls(descriptor, properties)
    plugin.init()
    return plugin


def descriptor_from_properties(
    name: str,
    properties: PropertySet,
    hosts: tuple[tuple[str, int], ...] = (),
) -> PluginDescriptor:
    """Collect the plugin.<name>.* property namespace into a descriptor."""
    prefix = f"plugin.{name}."
    params = {
        key[len(prefix):]: value
        for key, value in properties.effective().items()
        if key.startswith(prefix)
    }
    return PluginDescriptor(name=name, hosts=hosts, params=params)


def parse_hosts(spec: str) -> tuple[tuple[str, int], ...]:
    """Parse ``host:port[,host:port...]`` into host tuples."""
    hosts = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        host, _, port = part.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad host spec {part!r}; expected host:port")
        hosts.append((host, int(port)))
    return tuple(hosts)


from . import composite, memstore, resp  # noqa: E402,F401  (registers built-ins)
