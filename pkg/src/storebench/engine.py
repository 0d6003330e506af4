"""Per-node load generator.

Reader and writer pools share one token bucket per operation type so the
configured rate applies to the node as a whole. Workers react to config
changes between operations: enabled flags gate issuance without tearing
pools down, rate changes retarget the shared buckets in place, pool-size
changes grow by spawning and shrink by cooperative retirement, and
changes to the key space swap in fresh generators. Control transitions
(start/stop/backfill) serialize through one guard lock.
"""

from __future__ import annotations

import logging
import random
import threading
import time

from . import metrics as metrics_mod
from .metrics import MetricsRegistry
from .plugins import Plugin, PluginError
from .properties import PropertyError, PropertySet
from .ratelimit import TokenBucket
from .workload import (
    KeyGenerator,
    WorkloadConfig,
    WorkloadConfigError,
    key_name,
    payload_bytes,
)

log = logging.getLogger(__name__)

IDLE = "Idle"
BACKFILLING = "Backfilling"
RUNNING = "Running"

READS = "reads"
WRITES = "writes"
BOTH = "both"

_WRITER_SEED_OFFSET = 100_000
_STOP_GRACE_SECONDS = 2.0


class EngineBusyError(Exception):
    """Raised when a control operation conflicts with a backfill in progress."""


class BackfillReport(dict):
    """Completion report: requested/success/fail counts plus wall seconds."""


class _Worker(threading.Thread):
    def __init__(self, engine: "Engine", role: str, ordinal: int):
        super().__init__(name=f"bench-{role}-{ordinal}", daemon=True)
        self.role = role
        self.ordinal = ordinal
        self.engine = engine
        self.started_at = time.time()
        # set at stop time; a worker stuck in a slow op past the stop
        # grace must not resume issuing after a quick restart re-raises
        # the global started flag
        self.retired = False

    def _seed(self, base_seed: int) -> int:
        offset = _WRITER_SEED_OFFSET if self.role == metrics_mod.WRITE else 0
        return base_seed + offset + self.ordinal

    def run(self) -> None:
        engine = self.engine
        generator: KeyGenerator | None = None
        generation = -1
        is_writer = self.role == metrics_mod.WRITE
        while True:
            if self.retired:
                break
            if not engine._role_started(self.role):
                break
            if self.ordinal >= engine._pool_target(self.role):
                break
            # one atomic snapshot of (generation, config, window epoch)
            current_generation, cfg, window_epoch = engine._workload_state
            enabled = cfg.write_enabled if is_writer else cfg.read_enabled
            if not enabled:
                time.sleep(0.02)
                continue
            if generation != current_generation:
                generation = current_generation
                generator = KeyGenerator(
                    cfg, self._seed(engine.base_seed), window_epoch=window_epoch
                )
            limiter = engine.write_limiter if is_writer else engine.read_limiter
            if not limiter.acquire(timeout=0.1):
                continue
            key = generator.next_key(time.monotonic())
            try:
                if is_writer:
                    result = engine.plugin.write(key, generator.next_payload())
                else:
                    result = engine.plugin.read(key)
            except PluginError as exc:
                engine.metrics.record(self.role, metrics_mod.FAILURE, 0)
                log.debug("worker %s op failed: %s", self.name, exc)
                continue
            engine.metrics.record(
                self.role, result.status, result.latency_us, cache_hit=result.cache_hit
            )


class Engine:
    def __init__(
        self,
        plugin: Plugin,
        properties: PropertySet,
        metrics: MetricsRegistry,
        base_seed: int = 0,
    ):
        self.plugin = plugin
        self.properties = properties
        self.metrics = metrics
        self.base_seed = base_seed
        self.config = WorkloadConfig.from_properties(properties)
        self.config_error: str | None = None
        self.read_limiter = TokenBucket(self.config.read_rate_limit)
        self.write_limiter = TokenBucket(self.config.write_rate_limit)

        self._guard = threading.Lock()
        self._phase = IDLE
        self._reads_started = False
        self._writes_started = False
        self._pools: dict[str, list[_Worker]] = {metrics_mod.READ: [], metrics_mod.WRITE: []}
        self._targets = {metrics_mod.READ: 0, metrics_mod.WRITE: 0}
        # (generation, config, window epoch) swapped as one reference so a
        # worker never pairs a new generation with a stale config
        self._workload_state = (0, self.config, time.monotonic())
        self._backfill_thread: threading.Thread | None = None
        self._backfill_progress = (0, 0)
        self.last_backfill_report: BackfillReport | None = None
        properties.watch("*", self._on_property_change)

    # -- status ----------------------------------------------------------

    @property
    def phase(self) -> str:
        return self._phase

    def _role_started(self, role: str) -> bool:
        return self._writes_started if role == metrics_mod.WRITE else self._reads_started

    def _pool_target(self, role: str) -> int:
        return self._targets[role]

    def active_workers(self, role: str) -> int:
        cfg = self.config
        enabled = cfg.write_enabled if role == metrics_mod.WRITE else cfg.read_enabled
        if not enabled or not self._role_started(role):
            return 0
        return sum(1 for w in self._pools[role] if w.is_alive())

    def worker_census(self) -> list[dict]:
        census = []
        for role, pool in self._pools.items():
            for worker in pool:
                if worker.is_alive():
                    census.append(
                        {
                            "role": role,
                            "ordinal": worker.ordinal,
                            "threadId": worker.ident,
                            "startedAt": worker.started_at,
                        }
                    )
        return census

    def status(self) -> dict:
        done, total = self._backfill_progress
        return {
            "phase": self._phase,
            "activeReaders": self.active_workers(metrics_mod.READ),
            "activeWriters": self.active_workers(metrics_mod.WRITE),
            "backfill": {"done": done, "total": total} if self._phase == BACKFILLING else None,
            "configError": self.config_error,
        }

    # -- workload control --------------------------------------------------

    def start_workload(self, which: str = BOTH) -> None:
        with self._guard:
            if self._phase == BACKFILLING:
                raise EngineBusyError("busy: backfill in progress")
            if which in (READS, BOTH):
                self._reads_started = True
            if which in (WRITES, BOTH):
                self._writes_started = True
            self._resize_pools_locked()
            self._update_phase_locked()

    def stop_workload(self, which: str = BOTH) -> None:
        with self._guard:
            stopped: list[_Worker] = []
            if which in (READS, BOTH):
                self._reads_started = False
                stopped.extend(self._pools[metrics_mod.READ])
                self._pools[metrics_mod.READ] = []
                self._targets[metrics_mod.READ] = 0
            if which in (WRITES, BOTH):
                self._writes_started = False
                stopped.extend(self._pools[metrics_mod.WRITE])
                self._pools[metrics_mod.WRITE] = []
                self._targets[metrics_mod.WRITE] = 0
            self._update_phase_locked()
        for worker in stopped:
            worker.retired = True
        deadline = time.monotonic() + _STOP_GRACE_SECONDS
        for worker in stopped:
            worker.join(timeout=max(0.0, deadline - time.monotonic()))

    def _update_phase_locked(self) -> None:
        if self._phase == BACKFILLING:
            return
        self._phase = RUNNING if (self._reads_started or self._writes_started) else IDLE

    def _resize_pools_locked(self) -> None:
        for role, started, count in (
            (metrics_mod.READ, self._reads_started, self.config.num_readers),
            (metrics_mod.WRITE, self._writes_started, self.config.num_writers),
        ):
            if not started:
                continue
            self._targets[role] = count
            pool = [w for w in self._pools[role] if w.is_alive()]
            existing = {w.ordinal for w in pool}
            for ordinal in range(count):
                if ordinal not in existing:
                    worker = _Worker(self, role, ordinal)
                    pool.append(worker)
                    worker.start()
            self._pools[role] = pool

    # -- backfill -----------------------------------------------------------

    def backfill(self, start: int, end: int) -> BackfillReport:
        """Write every key in [start, end) once; blocks until done."""
        self.backfill_async(start, end)
        self._backfill_thread.join()
        return self.last_backfill_report

    def backfill_async(self, start: int, end: int) -> None:
        cfg = self.config
        if not 0 <= start < end <= cfg.num_keys:
            raise ValueError(f"backfill range [{start}, {end}) outside [0, {cfg.num_keys})")
        with self._guard:
            if self._phase != IDLE:
                raise EngineBusyError(f"busy: engine is {self._phase}")
            self._phase = BACKFILLING
            self._backfill_progress = (0, end - start)
            self._backfill_thread = threading.Thread(
                target=self._run_backfill, args=(start, end), daemon=True
            )
            self._backfill_thread.start()

    def _run_backfill(self, start: int, end: int) -> None:
        cfg = self.config
        parallelism = max(1, cfg.num_writers)
        counters = {"success": 0, "fail": 0}
        counter_lock = threading.Lock()
        next_key = {"value": start}
        started = time.monotonic()

        def pump() -> None:
            while True:
                with counter_lock:
                    index = next_key["value"]
                    if index >= end:
                        return
                    next_key["value"] = index + 1
                value = self._backfill_payload(index, cfg)
                try:
                    result = self.plugin.write(key_name(index), value)
                    ok = result.status == metrics_mod.SUCCESS
                    self.metrics.record(metrics_mod.WRITE, result.status, result.latency_us)
                except PluginError:
                    ok = False
                    self.metrics.record(metrics_mod.WRITE, metrics_mod.FAILURE, 0)
                with counter_lock:
                    counters["success" if ok else "fail"] += 1
                    self._backfill_progress = (
                        counters["success"] + counters["fail"],
                        end - start,
                    )

        threads = [threading.Thread(target=pump, daemon=True) for _ in range(parallelism)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        report = BackfillReport(
            requested=end - start,
            success=counters["success"],
            fail=counters["fail"],
            seconds=round(time.monotonic() - started, 3),
        )
        with self._guard:
            self.last_backfill_report = report
            self._phase = IDLE

    def _backfill_payload(self, index: int, cfg: WorkloadConfig) -> bytes:
        value_index = index % cfg.num_values
        if cfg.user_variable_data_size:
            length = random.Random(self.base_seed ^ index).randint(1, cfg.data_size)
        else:
            length = cfg.data_size
        return payload_bytes(value_index, length)

    # -- dynamic reconfiguration --------------------------------------------

    def _on_property_change(self, name: str, value: str | None) -> None:
        self.reconcile()

    def reconcile(self) -> None:
        """Re-derive the workload config from the property set and apply it.

        Invalid values are rejected as a unit: the engine keeps running
        on the previous config and surfaces the error via status().
        """
        try:
            new_cfg = WorkloadConfig.from_properties(self.properties)
        except (WorkloadConfigError, PropertyError) as exc:
            self.config_error = str(exc)
            log.warning("config change rejected: %s", exc)
            return
        self.config_error = None
        old_cfg = self.config
        if new_cfg == old_cfg:
            return
        with self._guard:
            self.config = new_cfg
            if new_cfg.read_rate_limit != old_cfg.read_rate_limit:
                self.read_limiter.set_rate(new_cfg.read_rate_limit)
            if new_cfg.write_rate_limit != old_cfg.write_rate_limit:
                self.write_limiter.set_rate(new_cfg.write_rate_limit)
            generation, _, window_epoch = self._workload_state
            if new_cfg.generator_fingerprint() != old_cfg.generator_fingerprint():
                generation += 1
                if new_cfg.distribution != old_cfg.distribution:
                    window_epoch = time.monotonic()
            self._workload_state = (generation, new_cfg, window_epoch)
            if self._phase != BACKFILLING:
                self._resize_pools_locked()

    # -- shutdown -------------------------------------------------------------

    def close(self) -> None:
        self.stop_workload(BOTH)
        self.properties.unwatch(self._on_property_change)
