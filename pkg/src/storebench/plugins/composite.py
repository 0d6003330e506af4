"""Cache-aside composite plugin: one read/write surface over a cache
driver plus a backing driver, with a runtime toggle between the cached
path and hitting the backing store directly.

Params (plugin.<name>.*):
    cachePlugin      registry name of the cache driver (default memstore)
    backingPlugin    registry name of the backing driver (default memstore)
    cacheCapacity    LRU entries for a memstore cache (default 1000)
    useCache         initial routing; also read live per op, so toggling
                     the property mid-run reroutes without a restart
    cache.* / backing.*   forwarded to the respective sub-plugin
"""

from __future__ import annotations

import time

from . import (
    FAILURE,
    NOT_FOUND,
    SUCCESS,
    OpResult,
    Plugin,
    PluginDescriptor,
    create_plugin,
    elapsed_us,
    register_plugin,
)
from ..properties import PropertyTypeError


def _sub_params(params: dict[str, str], prefix: str) -> dict[str, str]:
    return {k[len(prefix):]: v for k, v in params.items() if k.startswith(prefix)}


class CompositePlugin(Plugin):
    declares_cache = True

    def __init__(self, descriptor, properties):
        super().__init__(descriptor, properties)
        self._use_cache_prop = f"plugin.{descriptor.name}.useCache"
        self._default_use_cache = descriptor.param("useCache", "true") == "true"
        self.cache: Plugin | None = None
        self.backing: Plugin | None = None

    def init(self) -> None:
        params = self.descriptor.params
        cache_params = _sub_params(params, "cache.")
        cache_params.setdefault("maxEntries", params.get("cacheCapacity", "1000"))
        backing_params = _sub_params(params, "backing.")
        self.cache = create_plugin(
            PluginDescriptor(
                name=f"{params.get('cachePlugin', 'memstore')}:{self.descriptor.name}.cache",
                params=cache_params,
            ),
            self.properties,
        )
        self.backing = create_plugin(
            PluginDescriptor(
                name=f"{params.get('backingPlugin', 'memstore')}:{self.descriptor.name}.backing",
                hosts=self.descriptor.hosts,
                params=backing_params,
            ),
            self.properties,
        )

    def shutdown(self) -> None:
        super().shutdown()
        for plugin in (self.cache, self.backing):
            if plugin is not None:
                plugin.shutdown()

    def _use_cache(self) -> bool:
        try:
            value = self.properties.get_bool(self._use_cache_prop)
        except PropertyTypeError:
            value = None
        return self._default_use_cache if value is None else value

    def read(self, key: str) -> OpResult:
        self._check_open()
        start = time.perf_counter()
        if not self._use_cache():
            result = self.backing.read(key)
            return OpResult(result.status, elapsed_us(start), detail=result.detail, value=result.value)

        degraded = None
        try:
            cached = self.cache.read(key)
        except Exception as exc:
            cached = OpResult(FAILURE, 0, detail=str(exc))
        if cached.status == SUCCESS:
            return OpResult(SUCCESS, elapsed_us(start), cache_hit=True, value=cached.value)
        if cached.status not in (NOT_FOUND,):
            degraded = f"cache degraded: {cached.detail or cached.status}"

        result = self.backing.read(key)
        if result.status == SUCCESS and degraded is None:
            self._populate(key, result.value)
        return OpResult(
            result.status,
            elapsed_us(start),
            detail=degraded or result.detail,
            cache_hit=False,
            value=result.value,
        )

    def _populate(self, key: str, value: bytes | None) -> None:
        if value is None:
            return
        try:
            self.cache.write(key, value)
        except Exception:
            pass  # cache population is best effort; the read already succeeded

    def write(self, key: str, value: bytes) -> OpResult:
        self._check_open()
        start = time.perf_counter()
        if not self._use_cache():
            result = self.backing.write(key, value)
            return OpResult(result.status, elapsed_us(start), detail=result.detail)

        result = self.backing.write(key, value)
        if result.status != SUCCESS:
            return OpResult(result.status, elapsed_us(start), detail=result.detail)
        detail = None
        try:
            cache_result = self.cache.write(key, value)
            if cache_result.status != SUCCESS:
                detail = f"cache write failed: {cache_result.detail or cache_result.status}"
        except Exception as exc:
            detail = f"cache write failed: {exc}"
        return OpResult(SUCCESS, elapsed_us(start), detail=detail)


register_plugin("composite", CompositePlugin)
