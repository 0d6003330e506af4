"""Layered dynamic-property registry.

Three fixed layers hold string-valued properties: defaults (lowest),
file, and runtime overrides (highest). A name resolves to the value in
the highest layer that defines it (the "winning" value). Watchers are
notified exactly once per effective-value change; mutations that are
shadowed by a higher layer stay silent.
"""

from __future__ import annotations

import fnmatch
import logging
import threading
from pathlib import Path
from typing import Callable, Iterable, Mapping

log = logging.getLogger(__name__)

DEFAULTS_LAYER = 0
FILE_LAYER = 1
RUNTIME_LAYER = 2

_TRUE = "true"
_FALSE = "false"

# callback(name, new_effective_value_or_None)
WatchCallback = Callable[[str, "str | None"], None]


class PropertyError(Exception):
    pass


class PropertyTypeError(PropertyError):
    """A property is defined but does not parse as the requested type."""


class PropertyFileError(PropertyError):
    """The properties file is missing or malformed."""


def parse_properties_text(text: str, source: str = "<string>") -> dict[str, str]:
    """Parse ``name=value`` lines; ``#`` starts a comment, later duplicates win.

    Raises PropertyFileError naming the offending line number on malformed
    input; never returns a partial result.
    """
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise PropertyFileError(f"{source}:{lineno}: expected name=value, got {line!r}")
        name, _, value = line.partition("=")
        name = name.strip()
        if not name:
            raise PropertyFileError(f"{source}:{lineno}: empty property name")
        entries[name] = value.strip()
    return entries


def format_properties_text(entries: Mapping[str, str]) -> str:
    return "".join(f"{name}={value}\n" for name, value in entries.items())


class PropertySet:
    """Thread-safe property registry with winning-value resolution.

    Readers never block on watcher callbacks: mutations update the layers
    under a short lock, then deliver notifications outside it. Notification
    delivery itself is serialized so each watcher sees changes in order.
    """

    def __init__(
        self,
        defaults: Mapping[str, str] | None = None,
        poll_interval_seconds: int = 5,
    ):
        if poll_interval_seconds < 1:
            raise ValueError("poll_interval_seconds must be positive")
        self.poll_interval_seconds = poll_interval_seconds
        self._layers: list[dict[str, str]] = [dict(defaults or {}), {}, {}]
        self._lock = threading.RLock()
        self._notify_lock = threading.Lock()
        self._watchers: list[tuple[str, WatchCallback]] = []
        self._file_path: Path | None = None
        self._poller: threading.Thread | None = None
        self._poll_stop = threading.Event()

    # -- resolution ----------------------------------------------------

    def effective(self) -> dict[str, str]:
        """Snapshot of every defined name resolved to its winning value."""
        with self._lock:
            merged: dict[str, str] = {}
            for layer in self._layers:
                merged.update(layer)
            return merged

    def get(self, name: str, default: str | None = None) -> str | None:
        with self._lock:
            for layer in reversed(self._layers):
                if name in layer:
                    return layer[name]
        return default

    def get_int(self, name: str, default: int | None = None) -> int | None:
        raw = self.get(name)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise PropertyTypeError(f"property {name}={raw!r} is not an integer") from None

    def get_float(self, name: str, default: float | None = None) -> float | None:
        raw = self.get(name)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise PropertyTypeError(f"property {name}={raw!r} is not a number") from None

    def get_bool(self, name: str, default: bool | None = None) -> bool | None:
        raw = self.get(name)
        if raw is None:
            return default
        if raw == _TRUE:
            return True
        if raw == _FALSE:
            return False
        raise PropertyTypeError(f"property {name}={raw!r} is not a boolean (use true/false)")

    def get_list(self, name: str, default: list[str] | None = None) -> list[str] | None:
        raw = self.get(name)
        if raw is None:
            return default
        return [item.strip() for item in raw.split(",") if item.strip()]

    # -- mutation ------------------------------------------------------

    def set_property(self, name: str, value: str) -> None:
        """Set a runtime override. Watchers fire before this returns."""
        if not name:
            raise PropertyError("property name must be nonempty")
        self._mutate(RUNTIME_LAYER, {name: str(value)}, replace=False)

    def clear_property(self, name: str) -> None:
        """Remove a runtime override, exposing lower layers again."""
        with self._lock:
            if name not in self._layers[RUNTIME_LAYER]:
                return
        self._mutate(RUNTIME_LAYER, {name: None}, replace=False)

    def set_defaults(self, entries: Mapping[str, str]) -> None:
        self._mutate(DEFAULTS_LAYER, {k: str(v) for k, v in entries.items()}, replace=False)

    def load_file(self, path: str | Path) -> dict[str, str]:
        """Parse ``path`` and atomically replace the file layer.

        Load or parse failures raise without touching the current layer.
        Returns the parsed entries.
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise PropertyFileError(f"cannot read properties file {path}: {exc}") from exc
        entries = parse_properties_text(text, source=str(path))
        self._file_path = path
        self._mutate(FILE_LAYER, entries, replace=True)
        return entries

    def _mutate(
        self,
        layer_index: int,
        entries: Mapping[str, str | None],
        replace: bool,
    ) -> None:
        with self._lock:
            layer = self._layers[layer_index]
            before = {name: self.get(name) for name in self._names_of_interest(layer, entries, replace)}
            if replace:
                layer.clear()
            for name, value in entries.items():
                if value is None:
                    layer.pop(name, None)
                else:
                    layer[name] = value
            changes = []
            for name, old in before.items():
                new = self.get(name)
                if new != old:
                    changes.append((name, new))
        if changes:
            self._notify(changes)

    @staticmethod
    def _names_of_interest(
        layer: Mapping[str, str],
        entries: Mapping[str, str | None],
        replace: bool,
    ) -> set[str]:
        names = set(entries)
        if replace:
            names.update(layer)
        return names

    # -- change notification -------------------------------------------

    def watch(self, pattern: str, callback: WatchCallback) -> WatchCallback:
        """Register ``callback`` for names matching ``pattern`` (fnmatch glob).

        Returns the callback for use with unwatch().
        """
        with self._lock:
            self._watchers.append((pattern, callback))
        return callback

    def unwatch(self, callback: WatchCallback) -> None:
        with self._lock:
            self._watchers = [(p, cb) for p, cb in self._watchers if cb is not callback]

    def _notify(self, changes: Iterable[tuple[str, str | None]]) -> None:
        with self._lock:
            watchers = list(self._watchers)
        with self._notify_lock:
            for name, value in changes:
                for pattern, callback in watchers:
                    if name == pattern or fnmatch.fnmatchcase(name, pattern):
                        try:
                            callback(name, value)
                        except Exception:
                            log.exception("property watcher failed for %s", name)

    # -- file polling ---------------------------------------------------

    def start_file_polling(self, path: str | Path | None = None) -> None:
        """Reload the file layer every pollIntervalSeconds in the background.

        Reload errors are logged and leave the current layer intact.
        """
        if path is not None:
            self._file_path = Path(path)
        if self._file_path is None:
            raise PropertyError("no properties file configured to poll")
        if self._poller is not None:
            return
        self._poll_stop.clear()
        self._poller = threading.Thread(target=self._poll_loop, name="props-poller", daemon=True)
        self._poller.start()

    def stop_file_polling(self) -> None:
        self._poll_stop.set()
        if self._poller is not None:
            self._poller.join(timeout=2)
            self._poller = None

    def _poll_loop(self) -> None:
        while not self._poll_stop.wait(self._current_poll_interval()):
            try:
                self.load_file(self._file_path)
            except PropertyFileError as exc:
                log.warning("properties reload skipped: %s", exc)

    def _current_poll_interval(self) -> float:
        try:
            value = self.get_int("pollIntervalSeconds", self.poll_interval_seconds)
        except PropertyTypeError:
            value = self.poll_interval_seconds
        return max(1, value or self.poll_interval_seconds)
