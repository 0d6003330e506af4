import time

import pytest

from storebench.engine import BOTH, READS, WRITES, Engine, EngineBusyError
from storebench.metrics import (
    FAILURE,
    READ,
    SUCCESS,
    WRITE,
    MetricsRegistry,
)
from storebench.plugins import PluginDescriptor, create_plugin
from storebench.properties import PropertySet


def build_engine(defaults=None, plugin_params=None, seed=0):
    props = PropertySet(defaults=defaults or {})
    params = {k: str(v) for k, v in (plugin_params or {}).items()}
    plugin = create_plugin(PluginDescriptor(name="memstore", params=params), props)
    metrics = MetricsRegistry()
    engine = Engine(plugin, props, metrics, base_seed=seed)
    return engine, props, plugin, metrics


def count(metrics, op, status=SUCCESS):
    return metrics.snapshot().op(op).counts[status]


def total_ops(metrics, op):
    snap = metrics.snapshot().op(op)
    return sum(snap.counts.values())


def wait_until(predicate, timeout=5.0, interval=0.02):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return predicate()


@pytest.fixture
def engine_env():
    built = []

    def factory(**kwargs):
        engine, props, plugin, metrics = build_engine(**kwargs)
        built.append(engine)
        return engine, props, plugin, metrics

    yield factory
    for engine in built:
        engine.close()


# ---------------------------------------------------------------------------
# backfill


def test_backfill_writes_every_key_once(engine_env):
    engine, _, plugin, _ = engine_env(defaults={"numKeys": "100"})
    report = engine.backfill(0, 100)
    assert plugin.size() == 100
    assert report["success"] == 100
    assert report["fail"] == 0
    assert engine.phase == "Idle"


def test_backfill_while_backfilling_is_rejected(engine_env):
    engine, _, _, _ = engine_env(
        defaults={"numKeys": "500", "numWriters": "1"},
        plugin_params={"baseLatencyMs": "5"},
    )
    engine.backfill_async(0, 500)
    assert engine.phase == "Backfilling"
    with pytest.raises(EngineBusyError, match="busy"):
        engine.backfill_async(0, 10)
    with pytest.raises(EngineBusyError, match="busy"):
        engine.start_workload(BOTH)
    engine._backfill_thread.join(timeout=10)
    assert engine.phase == "Idle"


def test_backfill_with_error_rate_counts_binomial_failures(engine_env):
    engine, _, _, _ = engine_env(
        defaults={"numKeys": "2000", "numWriters": "4"},
        plugin_params={"errorRate": "0.5", "seed": "7"},
    )
    report = engine.backfill(0, 2000)
    assert report["success"] + report["fail"] == 2000
    assert report["fail"] == pytest.approx(1000, abs=100)  # 5% of range


def test_backfill_range_validation(engine_env):
    engine, _, _, _ = engine_env(defaults={"numKeys": "10"})
    with pytest.raises(ValueError):
        engine.backfill_async(5, 3)
    with pytest.raises(ValueError):
        engine.backfill_async(0, 11)


def test_backfill_progress_observable(engine_env):
    engine, _, _, _ = engine_env(
        defaults={"numKeys": "300", "numWriters": "1"},
        plugin_params={"baseLatencyMs": "2"},
    )
    engine.backfill_async(0, 300)
    assert wait_until(lambda: engine.status()["backfill"] is not None and engine.status()["backfill"]["done"] > 0, timeout=3)
    status = engine.status()
    assert status["phase"] == "Backfilling"
    assert status["backfill"]["total"] == 300
    engine._backfill_thread.join(timeout=10)


# ---------------------------------------------------------------------------
# start/stop


def test_start_reads_with_read_enabled_false_issues_nothing(engine_env):
    engine, _, _, metrics = engine_env(
        defaults={"readEnabled": "false", "numReaders": "2", "readRateLimit": "200"}
    )
    engine.start_workload(READS)
    assert engine.phase == "Running"
    time.sleep(0.4)
    assert total_ops(metrics, READ) == 0
    assert engine.active_workers(READ) == 0  # gated by the enabled flag


def test_stop_reads_leaves_writes_running(engine_env):
    engine, _, _, metrics = engine_env(
        defaults={"numReaders": "2", "numWriters": "2", "readRateLimit": "150", "writeRateLimit": "150"}
    )
    engine.start_workload(BOTH)
    assert wait_until(lambda: total_ops(metrics, READ) > 10 and total_ops(metrics, WRITE) > 10)
    engine.stop_workload(READS)
    reads_at_stop = total_ops(metrics, READ)
    writes_at_stop = total_ops(metrics, WRITE)
    time.sleep(0.5)
    assert total_ops(metrics, READ) == reads_at_stop
    assert total_ops(metrics, WRITE) > writes_at_stop
    assert engine.phase == "Running"


def test_stop_when_idle_is_a_noop(engine_env):
    engine, _, _, _ = engine_env()
    engine.stop_workload(BOTH)
    assert engine.phase == "Idle"


def test_stop_both_quiesces_within_bound(engine_env):
    engine, _, _, metrics = engine_env(
        defaults={"numReaders": "4", "numWriters": "2", "readRateLimit": "300", "writeRateLimit": "100"}
    )
    engine.start_workload(BOTH)
    assert wait_until(lambda: total_ops(metrics, READ) > 20)
    engine.stop_workload(BOTH)
    settled = total_ops(metrics, READ) + total_ops(metrics, WRITE)
    assert engine.phase == "Idle"
    time.sleep(0.5)
    assert total_ops(metrics, READ) + total_ops(metrics, WRITE) == settled


def test_counters_continue_across_restart(engine_env):
    engine, _, _, metrics = engine_env(defaults={"numReaders": "2", "readRateLimit": "200"})
    engine.start_workload(READS)
    assert wait_until(lambda: total_ops(metrics, READ) > 20)
    engine.stop_workload(READS)
    first = total_ops(metrics, READ)
    engine.start_workload(READS)
    assert wait_until(lambda: total_ops(metrics, READ) > first)
    assert total_ops(metrics, READ) >= first  # monotone, never reset


def test_reads_not_found_on_unpopulated_store_are_not_failures(engine_env):
    engine, _, _, metrics = engine_env(defaults={"numReaders": "2", "readRateLimit": "200"})
    engine.start_workload(READS)
    assert wait_until(lambda: total_ops(metrics, READ) > 50)
    engine.stop_workload(READS)
    snap = metrics.snapshot().read
    assert snap.counts[FAILURE] == 0
    assert snap.counts["NotFound"] > 0


# ---------------------------------------------------------------------------
# dynamic reconfiguration


def test_rate_change_retargets_without_restart(engine_env):
    engine, props, _, metrics = engine_env(
        defaults={"numWriters": "4", "writeRateLimit": "100", "readEnabled": "false"}
    )
    engine.start_workload(WRITES)
    assert wait_until(lambda: total_ops(metrics, WRITE) > 10)
    census_before = {w["threadId"] for w in engine.worker_census()}

    props.set_property("writeRateLimit", "500")
    time.sleep(1.0)  # settle at the new rate
    start_count = total_ops(metrics, WRITE)
    time.sleep(2.0)
    measured = (total_ops(metrics, WRITE) - start_count) / 2.0
    assert measured == pytest.approx(500, rel=0.08)

    census_after = {w["threadId"] for w in engine.worker_census()}
    assert census_before == census_after  # same workers, no restart


def test_pool_grows_and_shrinks_with_worker_counts(engine_env):
    engine, props, _, _ = engine_env(defaults={"numReaders": "4", "readRateLimit": "50"})
    engine.start_workload(READS)
    assert wait_until(lambda: engine.active_workers(READ) == 4)
    props.set_property("numReaders", "8")
    assert wait_until(lambda: engine.active_workers(READ) == 8, timeout=5)
    props.set_property("numReaders", "3")
    assert wait_until(lambda: engine.active_workers(READ) == 3, timeout=5)


def test_invalid_config_rejected_and_prior_retained(engine_env):
    engine, props, _, metrics = engine_env(defaults={"numKeys": "50", "numReaders": "2", "readRateLimit": "200"})
    engine.start_workload(READS)
    assert wait_until(lambda: total_ops(metrics, READ) > 10)
    props.set_property("numKeys", "0")
    assert engine.config.num_keys == 50
    assert "numKeys" in engine.status()["configError"]
    before = total_ops(metrics, READ)
    assert wait_until(lambda: total_ops(metrics, READ) > before)  # still running
    props.set_property("numKeys", "75")
    assert wait_until(lambda: engine.config.num_keys == 75)
    assert engine.status()["configError"] is None


def test_key_space_change_swaps_generators(engine_env):
    engine, props, plugin, metrics = engine_env(
        defaults={"numKeys": "1000", "numWriters": "2", "writeRateLimit": "300", "readEnabled": "false"}
    )
    engine.start_workload(WRITES)
    assert wait_until(lambda: total_ops(metrics, WRITE) > 30)
    props.set_property("numKeys", "3")
    time.sleep(0.5)
    with plugin._lock:
        plugin._store.clear()
    time.sleep(0.5)
    with plugin._lock:
        keys = set(plugin._store)
    assert keys <= {"key-0", "key-1", "key-2"}
    assert len(keys) > 0


def test_enabled_flag_toggle_pauses_and_resumes(engine_env):
    engine, props, _, metrics = engine_env(defaults={"numReaders": "2", "readRateLimit": "200"})
    engine.start_workload(READS)
    assert wait_until(lambda: total_ops(metrics, READ) > 10)
    props.set_property("readEnabled", "false")
    time.sleep(0.3)
    paused = total_ops(metrics, READ)
    time.sleep(0.4)
    assert total_ops(metrics, READ) - paused <= 2  # at most stragglers
    props.set_property("readEnabled", "true")
    assert wait_until(lambda: total_ops(metrics, READ) > paused + 10)


# ---------------------------------------------------------------------------
# rate behavior


def test_mixed_ratio_tracks_configured_limits(engine_env):
    engine, _, _, metrics = engine_env(
        defaults={
            "numReaders": "2",
            "numWriters": "2",
            "readRateLimit": "160",
            "writeRateLimit": "40",
        }
    )
    engine.start_workload(BOTH)
    time.sleep(5)
    engine.stop_workload(BOTH)
    reads = total_ops(metrics, READ)
    writes = total_ops(metrics, WRITE)
    assert reads / writes == pytest.approx(4.0, rel=0.15)


def test_stopped_worker_stuck_in_slow_op_never_resumes_after_restart(engine_env):
    import threading

    engine, _, plugin, _ = engine_env(defaults={"numReaders": "1", "readRateLimit": "100"})
    gate = threading.Event()
    first_call = threading.Event()
    issuers = set()
    issuers_lock = threading.Lock()
    original_read = plugin.read

    def gated_read(key):
        with issuers_lock:
            issuers.add(threading.get_ident())
        if not first_call.is_set():
            first_call.set()
            gate.wait(10)  # old worker hangs here across stop+restart
        return original_read(key)

    plugin.read = gated_read
    engine.start_workload(READS)
    assert first_call.wait(5)

    engine.stop_workload(READS)  # join times out; worker still in the op
    engine.start_workload(READS)  # replacement pool spawns immediately
    time.sleep(0.3)
    with issuers_lock:
        issuers.clear()
    gate.set()  # old worker finishes its op and must now retire
    time.sleep(1.0)
    with issuers_lock:
        active = set(issuers)
    assert len(active) == 1  # only the replacement worker is issuing
    assert engine.active_workers(READ) == 1


def test_single_worker_stall_does_not_collapse_aggregate_rate(engine_env):
    engine, _, plugin, metrics = engine_env(
        defaults={"numReaders": "4", "readRateLimit": "200", "writeEnabled": "false"}
    )

    # wrap the plugin: the first thread to read becomes a victim whose
    # every op stalls far beyond the others
    original_read = plugin.read
    victim = {}
    lock = __import__("threading").Lock()

    def stalling_read(key):
        me = __import__("threading").get_ident()
        with lock:
            victim.setdefault("id", me)
        if victim["id"] == me:
            time.sleep(0.4)
        return original_read(key)

    plugin.read = stalling_read
    engine.start_workload(READS)
    time.sleep(3)
    engine.stop_workload(READS)
    achieved = total_ops(metrics, READ) / 3
    assert achieved >= 200 * 0.85
