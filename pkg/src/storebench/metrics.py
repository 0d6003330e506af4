"""Bounded-memory operation statistics: counters, latency histograms,
windowed rates, and SLA-violation tracking.

All latency bookkeeping uses fixed log-spaced buckets spanning 1 us to
60 s with under 5 percent relative width, so memory never depends on how
many operations have been recorded. Percentiles are reported as the
upper bound of the bucket in which the requested rank lands, which keeps
them within one bucket width of the exact order statistic.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass

from .properties import PropertySet

READ = "read"
WRITE = "write"
OP_TYPES = (READ, WRITE)

SUCCESS = "Success"
NOT_FOUND = "NotFound"
FAILURE = "Failure"
TIMEOUT = "Timeout"
STATUSES = (SUCCESS, NOT_FOUND, FAILURE, TIMEOUT)

GROWTH = 1.05
MIN_US = 1.0
MAX_US = 60_000_000.0
_LOG_GROWTH = math.log(GROWTH)

# bucket 0 covers (0, 1] us; bucket i covers (GROWTH**(i-1), GROWTH**i] us
NUM_BUCKETS = math.ceil(math.log(MAX_US / MIN_US) / _LOG_GROWTH) + 1
UPPER_BOUNDS_US = tuple(
    min(MIN_US * GROWTH**i, MAX_US) for i in range(NUM_BUCKETS)
)

RATE_WINDOW_SECONDS = 10
PERCENTILE_WINDOW_SECONDS = 30
_RING_SLOTS = 64  # covers SLA windows up to 60 s plus the partial current second


def bucket_index(latency_us: float) -> int | None:
    """Bucket for a latency, or None when it overflows the 60 s range."""
    if latency_us <= MIN_US:
        return 0
    if latency_us > MAX_US:
        return None
    idx = math.ceil(math.log(latency_us) / _LOG_GROWTH)
    if idx < 1:
        return 1
    if idx >= NUM_BUCKETS:
        return NUM_BUCKETS - 1
    return idx


def percentile_from_buckets(
    buckets: list[int] | tuple[int, ...],
    overflow: int,
    p: float,
) -> float:
    """Upper bound (us) of the bucket where the cumulative count first
    reaches ceil(p * total); 0 for an empty distribution."""
    total = sum(buckets) + overflow
    if total == 0:
        return 0.0
    rank = math.ceil(p * total)
    cumulative = 0
    for i, count in enumerate(buckets):
        cumulative += count
        if cumulative >= rank:
            return UPPER_BOUNDS_US[i]
    return MAX_US


class LatencyHistogram:
    """Fixed-size log-bucket histogram over [1 us, 60 s].

    Not thread-safe on its own; MetricsRegistry serializes access.
    """

    __slots__ = ("buckets", "total_count", "overflow_count", "sum_us")

    def __init__(self):
        self.buckets = [0] * NUM_BUCKETS
        self.total_count = 0
        self.overflow_count = 0
        self.sum_us = 0.0

    def add(self, latency_us: float) -> None:
        idx = bucket_index(latency_us)
        if idx is None:
            self.overflow_count += 1
        else:
            self.buckets[idx] += 1
        self.total_count += 1
        self.sum_us += latency_us

    def percentile(self, p: float) -> float:
        return percentile_from_buckets(self.buckets, self.overflow_count, p)

    def average(self) -> float:
        return self.sum_us / self.total_count if self.total_count else 0.0

    def reset(self) -> None:
        self.buckets = [0] * NUM_BUCKETS
        self.total_count = 0
        self.overflow_count = 0
        self.sum_us = 0.0


@dataclass(frozen=True)
class SlaPolicy:
    """What counts as an SLA violation.

    ``perOp`` compares every operation's latency to the threshold; the
    percentile/avg metrics turn the window into a single indicator:
    ratio 1.0 when the windowed statistic breaches the threshold.
    """

    metric: str = "perOp"  # perOp | p99 | p95 | avg
    threshold_us: float = 100_000.0
    violation_window_seconds: int = 30

    def __post_init__(self):
        if self.metric not in ("perOp", "p99", "p95", "avg"):
            raise ValueError(f"unknown SLA metric {self.metric!r}")
        if self.threshold_us <= 0:
            raise ValueError("SLA threshold must be positive")
        if self.violation_window_seconds < 1:
            raise ValueError("SLA window must be at least 1 s")

    @classmethod
    def from_properties(cls, props: PropertySet) -> "SlaPolicy":
        return cls(
            metric=props.get("sla.metric", "perOp"),
            threshold_us=props.get_float("sla.thresholdMs", 100.0) * 1000.0,
            violation_window_seconds=props.get_int("sla.windowSeconds", 30),
        )


@dataclass
class OpStats:
    counts: dict[str, int]
    rps: float
    avg_us: float
    p50_us: float
    p95_us: float
    p99_us: float
    buckets: list[int]

    def as_dict(self) -> dict:
        return {
            "success": self.counts[SUCCESS],
            "notFound": self.counts[NOT_FOUND],
            "failure": self.counts[FAILURE],
            "timeout": self.counts[TIMEOUT],
            "rps": self.rps,
            "avg_us": self.avg_us,
            "p50_us": self.p50_us,
            "p95_us": self.p95_us,
            "p99_us": self.p99_us,
            "buckets": self.buckets,
        }


@dataclass
class StatsSnapshot:
    timestamp: float
    read: OpStats
    write: OpStats
    cache_hit_ratio: float | None
    sla_violation_ratio: float

    def op(self, op_type: str) -> OpStats:
        return self.read if op_type == READ else self.write

    def as_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "read": self.read.as_dict(),
            "write": self.write.as_dict(),
            "cacheHitRatio": self.cache_hit_ratio,
            "slaViolationRatio": self.sla_violation_ratio,
        }


class _OpWindow:
    """One second of per-op-type windowed data."""

    __slots__ = ("total", "ok", "ok_sum_us", "ok_buckets", "ok_overflow", "all_buckets", "all_overflow")

    def __init__(self):
        self.reset()

    def reset(self):
        self.total = 0
        self.ok = 0
        self.ok_sum_us = 0.0
        self.ok_buckets = [0] * NUM_BUCKETS
        self.ok_overflow = 0
        self.all_buckets = [0] * NUM_BUCKETS
        self.all_overflow = 0


class _Slot:
    __slots__ = ("second", "ops")

    def __init__(self):
        self.second = -1
        self.ops = {READ: _OpWindow(), WRITE: _OpWindow()}

    def claim(self, second: int):
        self.second = second
        self.ops[READ].reset()
        self.ops[WRITE].reset()


class MetricsRegistry:
    """Thread-safe recording surface for all workers on a node.

    record() takes one short lock; snapshot() and reset() take the same
    lock so every view is internally consistent and a reset is never
    observed half-applied.
    """

    def __init__(self, clock=time.monotonic):
        self._clock = clock
        self._lock = threading.Lock()
        self._counts = {op: {status: 0 for status in STATUSES} for op in OP_TYPES}
        self._histograms = {op: LatencyHistogram() for op in OP_TYPES}
        self._cache_hits = 0
        self._cache_misses = 0
        self._slots = [_Slot() for _ in range(_RING_SLOTS)]

    def record(
        self,
        op_type: str,
        status: str,
        latency_us: float,
        cache_hit: bool | None = None,
    ) -> None:
        if latency_us < 0:
            raise ValueError("latency must be nonnegative")
        idx = bucket_index(latency_us)
        now = self._clock()
        second = int(now)
        with self._lock:
            self._counts[op_type][status] += 1
            if status == SUCCESS:
                self._histograms[op_type].add(latency_us)
            if cache_hit is True:
                self._cache_hits += 1
            elif cache_hit is False:
                self._cache_misses += 1
            window = self._slot(second).ops[op_type]
            window.total += 1
            if idx is None:
                window.all_overflow += 1
            else:
                window.all_buckets[idx] += 1
            if status == SUCCESS:
                window.ok += 1
                window.ok_sum_us += latency_us
                if idx is None:
                    window.ok_overflow += 1
                else:
                    window.ok_buckets[idx] += 1

    def _slot(self, second: int) -> _Slot:
        slot = self._slots[second % _RING_SLOTS]
        if slot.second != second:
            slot.claim(second)
        return slot

    def _window_slots(self, window_seconds: int, now: float | None = None):
        second = int(now if now is not None else self._clock())
        for back in range(window_seconds):
            slot = self._slots[(second - back) % _RING_SLOTS]
            if slot.second == second - back:
                yield slot

    def snapshot(self, policy: SlaPolicy | None = None) -> StatsSnapshot:
        with self._lock:
            now = self._clock()
            per_op = {}
            for op in OP_TYPES:
                rate_total = 0
                ok_buckets = [0] * NUM_BUCKETS
                ok_overflow = 0
                ok_count = 0
                ok_sum = 0.0
                for slot in self._window_slots(PERCENTILE_WINDOW_SECONDS, now):
                    window = slot.ops[op]
                    ok_count += window.ok
                    ok_sum += window.ok_sum_us
                    ok_overflow += window.ok_overflow
                    for i, count in enumerate(window.ok_buckets):
                        if count:
                            ok_buckets[i] += count
                for slot in self._window_slots(RATE_WINDOW_SECONDS, now):
                    rate_total += slot.ops[op].total
                per_op[op] = OpStats(
                    counts=dict(self._counts[op]),
                    rps=rate_total / RATE_WINDOW_SECONDS,
                    avg_us=(ok_sum / ok_count) if ok_count else 0.0,
                    p50_us=percentile_from_buckets(ok_buckets, ok_overflow, 0.50),
                    p95_us=percentile_from_buckets(ok_buckets, ok_overflow, 0.95),
                    p99_us=percentile_from_buckets(ok_buckets, ok_overflow, 0.99),
                    buckets=list(self._histograms[op].buckets),
                )
            tagged = self._cache_hits + self._cache_misses
            ratio = self._cache_hits / tagged if tagged else None
            violation = self._violation_ratio_locked(policy, now) if policy else 0.0
        return StatsSnapshot(
            timestamp=time.time(),
            read=per_op[READ],
            write=per_op[WRITE],
            cache_hit_ratio=ratio,
            sla_violation_ratio=violation,
        )

    def sla_violation_ratio(self, policy: SlaPolicy) -> float:
        with self._lock:
            return self._violation_ratio_locked(policy, self._clock())

    def _violation_ratio_locked(self, policy: SlaPolicy, now: float) -> float:
        slots = list(self._window_slots(policy.violation_window_seconds, now))
        if policy.metric == "perOp":
            threshold_bucket = bucket_index(policy.threshold_us)
            total = 0
            violations = 0
            for slot in slots:
                for op in OP_TYPES:
                    window = slot.ops[op]
                    total += window.total
                    violations += window.all_overflow
                    if threshold_bucket is None:
                        continue
                    for i in range(threshold_bucket + 1, NUM_BUCKETS):
                        violations += window.all_buckets[i]
            return violations / total if total else 0.0

        ok_buckets = [0] * NUM_BUCKETS
        ok_overflow = 0
        ok_count = 0
        ok_sum = 0.0
        for slot in slots:
            for op in OP_TYPES:
                window = slot.ops[op]
                ok_count += window.ok
                ok_sum += window.ok_sum_us
                ok_overflow += window.ok_overflow
                for i, count in enumerate(window.ok_buckets):
                    if count:
                        ok_buckets[i] += count
        if ok_count == 0:
            return 0.0
        if policy.metric == "avg":
            value = ok_sum / ok_count
        else:
            p = 0.99 if policy.metric == "p99" else 0.95
            value = percentile_from_buckets(ok_buckets, ok_overflow, p)
        return 1.0 if value > policy.threshold_us else 0.0

    def reset(self) -> None:
        with self._lock:
            self._counts = {op: {status: 0 for status in STATUSES} for op in OP_TYPES}
            for hist in self._histograms.values():
                hist.reset()
            self._cache_hits = 0
            self._cache_misses = 0
            for slot in self._slots:
                slot.second = -1

    # -- introspection used by boundedness checks -----------------------

    def structure_sizes(self) -> dict[str, int]:
        with self._lock:
            return {
                "histogram_buckets": len(self._histograms[READ].buckets),
                "ring_slots": len(self._slots),
                "slot_buckets": len(self._slots[0].ops[READ].ok_buckets),
            }

    def total_recorded(self) -> int:
        with self._lock:
            return sum(sum(statuses.values()) for statuses in self._counts.values())


def merge_stats_dicts(node_stats: list[dict]) -> dict:
    """Combine per-node /stats payloads into one cluster view.

    Counts and rates add; percentiles are recomputed from the summed
    bucket vectors (never averaged). When any node omits bucket vectors
    or reports an incompatible length, merged percentiles are left null
    and callers fall back to the per-node values.
    """
    merged: dict = {"timestamp": time.time()}
    for op in OP_TYPES:
        entries = [stats[op] for stats in node_stats]
        section: dict = {
            "success": sum(e["success"] for e in entries),
            "notFound": sum(e["notFound"] for e in entries),
            "failure": sum(e["failure"] for e in entries),
            "timeout": sum(e["timeout"] for e in entries),
            "rps": sum(e["rps"] for e in entries),
        }
        vectors = [e.get("buckets") for e in entries]
        if vectors and all(v is not None and len(v) == NUM_BUCKETS for v in vectors):
            summed = [0] * NUM_BUCKETS
            for vector in vectors:
                for i, count in enumerate(vector):
                    if count:
                        summed[i] += count
            overflow = sum(e["success"] for e in entries) - sum(summed)
            overflow = max(0, overflow)
            section["buckets"] = summed
            section["p50_us"] = percentile_from_buckets(summed, overflow, 0.50)
            section["p95_us"] = percentile_from_buckets(summed, overflow, 0.95)
            section["p99_us"] = percentile_from_buckets(summed, overflow, 0.99)
            weights = [e["success"] for e in entries]
            total_weight = sum(weights)
            section["avg_us"] = (
                sum(e["avg_us"] * w for e, w in zip(entries, weights)) / total_weight
                if total_weight
                else 0.0
            )
        else:
            section["buckets"] = None
            section["p50_us"] = section["p95_us"] = section["p99_us"] = None
            section["avg_us"] = None
        merged[op] = section

    hit_parts = [
        (stats.get("cacheHitRatio"), stats["read"]["success"])
        for stats in node_stats
        if stats.get("cacheHitRatio") is not None
    ]
    if hit_parts:
        weight = sum(w for _, w in hit_parts)
        merged["cacheHitRatio"] = (
            sum(r * w for r, w in hit_parts) / weight if weight else hit_parts[0][0]
        )
    else:
        merged["cacheHitRatio"] = None

    rps_weights = [
        stats["read"]["rps"] + stats["write"]["rps"] for stats in node_stats
    ]
    total_rps = sum(rps_weights)
    if total_rps:
        merged["slaViolationRatio"] = (
            sum(s["slaViolationRatio"] * w for s, w in zip(node_stats, rps_weights)) / total_rps
        )
    else:
        ratios = [s["slaViolationRatio"] for s in node_stats]
        merged["slaViolationRatio"] = max(ratios) if ratios else 0.0
    return merged
