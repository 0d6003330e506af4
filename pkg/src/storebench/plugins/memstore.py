"""Fault-injectable in-memory key-value store.

Serves as a deterministic system under test: configurable base latency,
an optional capacity cliff (latency jumps once the offered rate over the
trailing second exceeds a threshold), an error-injection rate, and
optional LRU eviction so it can play the cache role in a composite.

Params (plugin.<name>.*):
    baseLatencyMs    float, sleep applied to every op (default 0)
    cliffOpsPerSec   float, capacity cliff; 0 disables (default 0)
    cliffLatencyMs   float, latency once past the cliff (default 10x base)
    errorRate        float in [0,1], fraction of ops failed (default 0)
    maxEntries       int, LRU capacity in entries; 0 = unbounded
    seed             int, for the fault-injection rng (default 1)
"""

from __future__ import annotations

import random
import threading
import time
from collections import OrderedDict

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


class SlidingRateCounter:
    """Offered ops over the trailing window, tracked in fixed subslots."""

    def __init__(self, window_seconds: float = 1.0, slots: int = 10):
        self._slot_width = window_seconds / slots
        self._slots = slots
        self._counts = [0] * slots
        self._ids = [-1] * slots
        self._window = window_seconds
        self._lock = threading.Lock()

    def record_and_rate(self, now: float) -> float:
        """Count one arrival and return the trailing-window rate including it."""
        slot_id = int(now / self._slot_width)
        with self._lock:
            idx = slot_id % self._slots
            if self._ids[idx] != slot_id:
                self._ids[idx] = slot_id
                self._counts[idx] = 0
            self._counts[idx] += 1
            total = 0
            for back in range(self._slots):
                wanted = slot_id - back
                pos = wanted % self._slots
                if self._ids[pos] == wanted:
                    total += self._counts[pos]
            return total / self._window


class InMemoryStorePlugin(Plugin):
    def __init__(self, descriptor, properties):
        super().__init__(descriptor, properties)
        self.base_latency_s = descriptor.param_float("baseLatencyMs", 0.0) / 1000.0
        self.cliff_ops_per_sec = descriptor.param_float("cliffOpsPerSec", 0.0)
        default_cliff_ms = max(self.base_latency_s * 1000.0 * 10.0, 1.0)
        self.cliff_latency_s = descriptor.param_float("cliffLatencyMs", default_cliff_ms) / 1000.0
        self.error_rate = descriptor.param_float("errorRate", 0.0)
        self.max_entries = descriptor.param_int("maxEntries", 0)
        self._rng = random.Random(descriptor.param_int("seed", 1))
        self._store: OrderedDict[str, bytes] = OrderedDict()
        self._lock = threading.Lock()
        self._rate = SlidingRateCounter()

    def init(self) -> None:
        if not 0.0 <= self.error_rate <= 1.0:
            raise PluginInitError(f"errorRate {self.error_rate} outside [0, 1]")
        if self.cliff_ops_per_sec and self.cliff_latency_s < self.base_latency_s:
            raise PluginInitError("cliffLatencyMs must be at least baseLatencyMs")

    def size(self) -> int:
        with self._lock:
            return len(self._store)

    def corrupt(self, key: str, byte_offset: int) -> None:
        """Test hook: flip one bit of a stored value in place."""
        with self._lock:
            data = bytearray(self._store[key])
            data[byte_offset] ^= 0x01
            self._store[key] = bytes(data)

    def _simulate_latency(self, start: float) -> str | None:
        """Sleep per the fault profile; returns TIMEOUT when the profile
        pushes the op past its deadline."""
        rate = self._rate.record_and_rate(time.perf_counter())
        delay = self.base_latency_s
        if self.cliff_ops_per_sec and rate > self.cliff_ops_per_sec:
            delay = self.cliff_latency_s
        if delay > 0:
            if delay > self.op_timeout_seconds:
                time.sleep(self.op_timeout_seconds)
                return TIMEOUT
            time.sleep(delay)
        return None

    def write(self, key: str, value: bytes) -> OpResult:
        self._check_open()
        start = time.perf_counter()
        timed_out = self._simulate_latency(start)
        if timed_out:
            return OpResult(TIMEOUT, elapsed_us(start), detail="deadline exceeded")
        if self.error_rate and self._rng.random() < self.error_rate:
            return OpResult(FAILURE, elapsed_us(start), detail="injected fault")
        with self._lock:
            self._store[key] = bytes(value)
            self._store.move_to_end(key)
            if self.max_entries and len(self._store) > self.max_entries:
                self._store.popitem(last=False)
        return OpResult(SUCCESS, elapsed_us(start))

    def read(self, key: str) -> OpResult:
        self._check_open()
        start = time.perf_counter()
        timed_out = self._simulate_latency(start)
        if timed_out:
            return OpResult(TIMEOUT, elapsed_us(start), detail="deadline exceeded")
        if self.error_rate and self._rng.random() < self.error_rate:
            return OpResult(FAILURE, elapsed_us(start), detail="injected fault")
        with self._lock:
            value = self._store.get(key)
            if value is not None and self.max_entries:
                self._store.move_to_end(key)
        if value is None:
            return OpResult(NOT_FOUND, elapsed_us(start))
        if not validate_payload(value):
            return OpResult(FAILURE, elapsed_us(start), detail="corruption")
        return OpResult(SUCCESS, elapsed_us(start), value=value)


register_plugin("memstore", InMemoryStorePlugin)
