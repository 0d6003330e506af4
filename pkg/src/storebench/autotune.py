"""Closed-loop throughput discovery.

The controller ramps the offered rate multiplicatively until the SLA
violation ratio for an epoch crosses the configured threshold, then
shrinks the probing step geometrically and retreats to the last rate
that measured healthy. Every violating epoch strictly shrinks the step,
so the loop terminates; the converged rate is the highest rate observed
healthy, which brackets the true capacity from below within one final
probing step.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

from . import httpjson
from .agent import API_PREFIX
from .metrics import SlaPolicy

log = logging.getLogger(__name__)

RAMPING = "Ramping"
BACKING_OFF = "BackingOff"
CONVERGED = "Converged"

_MAX_EPOCHS_GUARD = 500


class TunerBusyError(Exception):
    """Another tuner already holds the rate lease on a target."""


@dataclass(frozen=True)
class TunerConfig:
    initial_rate: float
    max_rate: float
    sla: SlaPolicy
    increase_factor: float = 1.25
    backoff_factor: float = 0.5
    epoch_seconds: float = 30.0
    warmup_seconds: float = 10.0
    violation_threshold: float = 0.05
    convergence_epsilon: float = 0.02
    read_fraction: float = 0.8

    def __post_init__(self):
        if not 0 < self.initial_rate <= self.max_rate:
            raise ValueError("require 0 < initialRate <= maxRate")
        if self.increase_factor <= 1:
            raise ValueError("increaseFactor must exceed 1")
        if not 0 < self.backoff_factor < 1:
            raise ValueError("backoffFactor must be in (0, 1)")
        if not 0 < self.violation_threshold <= 1:
            raise ValueError("violationThreshold must be in (0, 1]")
        if self.convergence_epsilon <= 0:
            raise ValueError("convergenceEpsilon must be positive")
        if not 0 <= self.read_fraction <= 1:
            raise ValueError("readFraction must be in [0, 1]")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    rate: float
    violation_ratio: float
    phase: str

    def as_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "rate": round(self.rate, 3),
            "violationRatio": round(self.violation_ratio, 5),
            "phase": self.phase,
        }


@dataclass(frozen=True)
class TunerState:
    phase: str = RAMPING
    current_rate: float = 0.0
    last_good_rate: float = 0.0
    step_multiplier: float = 1.25
    history: tuple[EpochRecord, ...] = field(default_factory=tuple)

    @classmethod
    def initial(cls, cfg: TunerConfig) -> "TunerState":
        return cls(
            phase=RAMPING,
            current_rate=cfg.initial_rate,
            last_good_rate=0.0,
            step_multiplier=cfg.increase_factor,
        )


def tune_step(state: TunerState, cfg: TunerConfig, observed: float) -> TunerState:
    """Advance the controller by one measured epoch.

    ``observed`` is the SLA violation ratio measured while offering
    ``state.current_rate``. The returned state's current_rate is the
    next target; Converged is terminal.
    """
    if not 0.0 <= observed <= 1.0:
        raise ValueError(f"violation ratio must be in [0, 1], got {observed}")
    if state.phase == CONVERGED:
        return state

    record = EpochRecord(len(state.history), state.current_rate, observed, state.phase)
    history = state.history + (record,)

    if observed <= cfg.violation_threshold:
        last_good = state.current_rate
        if state.current_rate >= cfg.max_rate:
            return replace(
                state,
                phase=CONVERGED,
                current_rate=cfg.max_rate,
                last_good_rate=cfg.max_rate,
                history=history,
            )
        next_rate = min(state.current_rate * state.step_multiplier, cfg.max_rate)
        return replace(
            state,
            phase=RAMPING,
            current_rate=next_rate,
            last_good_rate=last_good,
            history=history,
        )

    # violating epoch: shrink the probing step, never target at or above
    # the rate that just violated
    violating = state.current_rate
    new_step = 1.0 + (state.step_multiplier - 1.0) * cfg.backoff_factor
    if new_step - 1.0 < cfg.convergence_epsilon:
        return replace(
            state,
            phase=CONVERGED,
            current_rate=state.last_good_rate,
            step_multiplier=new_step,
            history=history,
        )
    if state.phase == RAMPING:
        next_rate = state.last_good_rate * new_step
        if next_rate <= 0.0 or next_rate >= violating:
            next_rate = violating / new_step
    else:
        next_rate = state.last_good_rate
        if next_rate <= 0.0:
            next_rate = violating / new_step
    return replace(
        state,
        phase=BACKING_OFF,
        current_rate=next_rate,
        step_multiplier=new_step,
        history=history,
    )


@dataclass
class TunerReport:
    converged: bool
    converged_rate: float
    history: list[EpochRecord]
    aborted_reason: str | None = None

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "convergedRate": round(self.converged_rate, 3),
            "epochs": len(self.history),
            "abortedReason": self.aborted_reason,
            "history": [record.as_dict() for record in self.history],
        }


class AutoTuner:
    """Drives one or more agents through their control API.

    Holds the per-agent rate lease for the duration of the run so two
    tuners cannot fight over the same node. Rates are per node: each
    target receives currentRate split into read/write by readFraction.
    """

    def __init__(self, targets: list[str], cfg: TunerConfig, sleep=time.sleep, on_epoch=None):
        if not targets:
            raise ValueError("autotune requires at least one target agent")
        self.targets = [target.rstrip("/") for target in targets]
        self.cfg = cfg
        self._sleep = sleep
        self._on_epoch = on_epoch
        self._leased: list[str] = []

    # -- agent plumbing -----------------------------------------------------

    def _api(self, target: str, path: str) -> str:
        return f"{target}{API_PREFIX}{path}"

    def _set_property(self, target: str, name: str, value) -> None:
        httpjson.post_json(self._api(target, "/properties"), {"name": name, "value": str(value)})

    def _acquire_leases(self) -> None:
        for target in self.targets:
            try:
                httpjson.post_json(self._api(target, "/tuner/lease"))
            except httpjson.RequestError as exc:
                self._release_leases()
                if exc.status == 409:
                    raise TunerBusyError(str(exc)) from exc
                raise
            self._leased.append(target)

    def _release_leases(self) -> None:
        for target in self._leased:
            try:
                httpjson.post_json(self._api(target, "/tuner/release"))
            except httpjson.RequestError:
                pass
        self._leased = []

    def _install_sla(self) -> None:
        sla = self.cfg.sla
        window = min(sla.violation_window_seconds, max(1, int(self.cfg.epoch_seconds)))
        for target in self.targets:
            self._set_property(target, "sla.metric", sla.metric)
            self._set_property(target, "sla.thresholdMs", sla.threshold_us / 1000.0)
            self._set_property(target, "sla.windowSeconds", window)

    def _apply_rate(self, rate: float) -> None:
        read_rate = rate * self.cfg.read_fraction
        write_rate = rate - read_rate
        for target in self.targets:
            self._set_property(target, "readRateLimit", round(read_rate, 3))
            self._set_property(target, "writeRateLimit", round(write_rate, 3))

    def _ensure_running(self) -> None:
        for target in self.targets:
            status = httpjson.get_json(self._api(target, "/status"))
            if status.get("phase") == "Idle":
                httpjson.post_json(
                    self._api(target, "/workload/start"), params={"which": "both"}
                )

    def _observe(self) -> float:
        ratios: list[tuple[float, float]] = []
        for target in self.targets:
            stats = httpjson.get_json(self._api(target, "/stats"))
            weight = stats["read"]["rps"] + stats["write"]["rps"]
            ratios.append((stats["slaViolationRatio"], weight))
        total_weight = sum(weight for _, weight in ratios)
        if total_weight <= 0:
            return max(ratio for ratio, _ in ratios)
        return sum(ratio * weight for ratio, weight in ratios) / total_weight

    # -- main loop ------------------------------------------------------------

    def run(self) -> TunerReport:
        cfg = self.cfg
        self._acquire_leases()
        state = TunerState.initial(cfg)
        try:
            self._install_sla()
            self._ensure_running()
            while state.phase != CONVERGED and len(state.history) < _MAX_EPOCHS_GUARD:
                self._apply_rate(state.current_rate)
                self._sleep(cfg.warmup_seconds + cfg.epoch_seconds)
                observed = self._observe()
                state = tune_step(state, cfg, observed)
                if self._on_epoch is not None:
                    self._on_epoch(state.history[-1])
            converged = state.phase == CONVERGED
            final_rate = state.current_rate if converged else state.last_good_rate
            self._apply_rate(final_rate)
            return TunerReport(
                converged=converged,
                converged_rate=final_rate,
                history=list(state.history),
                aborted_reason=None if converged else "epoch guard exceeded",
            )
        except httpjson.RequestError as exc:
            # leave the cluster no hotter than the last known-good rate
            try:
                self._apply_rate(state.last_good_rate)
            except httpjson.RequestError:
                pass
            return TunerReport(
                converged=False,
                converged_rate=state.last_good_rate,
                history=list(state.history),
                aborted_reason=str(exc),
            )
        finally:
            self._release_leases()


def run_autotune(targets: list[str], cfg: TunerConfig, sleep=time.sleep, on_epoch=None) -> TunerReport:
    return AutoTuner(targets, cfg, sleep=sleep, on_epoch=on_epoch).run()
