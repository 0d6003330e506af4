"""Key-selection distributions, workload configuration, and payload synthesis.

Key generators are deterministic under a fixed seed so any run can be
reproduced. The zipfian sampler uses rejection inversion over ranks,
which needs no per-key setup table: construction cost is independent of
the key-space size. Sliding-window selection confines draws to a moving
contiguous slice of the key space, hopping a full window width per
advance interval and wrapping modulo the key count.
"""

from __future__ import annotations

import math
import random
import struct
from dataclasses import dataclass, field, replace
from typing import Mapping

from .properties import PropertySet

UNIFORM = "uniform"
ZIPFIAN = "zipfian"
SLIDING_WINDOW = "slidingwindow"

CHECKSUM_LEN = 8

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


class WorkloadConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# distribution + workload configuration


@dataclass(frozen=True)
class DistributionSpec:
    """Which key-selection process to run, with its parameters.

    ``inner`` applies only to the sliding window and names the
    distribution used inside the window (anything but another window).
    """

    kind: str = UNIFORM
    exponent: float = 1.0
    window_size: int = 0
    advance_interval_seconds: float = 0.0
    inner: str = UNIFORM

    def validate(self, num_keys: int) -> None:
        if self.kind not in (UNIFORM, ZIPFIAN, SLIDING_WINDOW):
            raise WorkloadConfigError(f"unknown distribution {self.kind!r}")
        if self.kind == ZIPFIAN and self.exponent <= 0:
            raise WorkloadConfigError("zipfian exponent must be positive")
        if self.kind == SLIDING_WINDOW:
            if self.inner not in (UNIFORM, ZIPFIAN):
                raise WorkloadConfigError(f"window inner distribution {self.inner!r} unsupported")
            if not 1 <= self.window_size <= num_keys:
                raise WorkloadConfigError(
                    f"windowSize must be in [1, numKeys], got {self.window_size}"
                )
            if self.advance_interval_seconds <= 0:
                raise WorkloadConfigError("windowAdvanceSeconds must be positive")
            if self.inner == ZIPFIAN and self.exponent <= 0:
                raise WorkloadConfigError("zipfian exponent must be positive")


@dataclass(frozen=True)
class WorkloadConfig:
    """The full set of dynamic benchmark parameters for one node."""

    num_keys: int = 1000
    num_values: int = 100
    data_size: int = 128
    num_writers: int = 2
    num_readers: int = 2
    write_enabled: bool = True
    read_enabled: bool = True
    write_rate_limit: float = 100.0
    read_rate_limit: float = 100.0
    user_variable_data_size: bool = False
    distribution: DistributionSpec = field(default_factory=DistributionSpec)

    def validate(self) -> "WorkloadConfig":
        if self.num_keys < 1:
            raise WorkloadConfigError("numKeys must be >= 1")
        if self.num_values < 1:
            raise WorkloadConfigError("numValues must be >= 1")
        if self.data_size < 1:
            raise WorkloadConfigError("dataSize must be >= 1")
        if self.num_writers < 0 or self.num_readers < 0:
            raise WorkloadConfigError("worker counts must be nonnegative")
        if self.write_rate_limit < 0 or self.read_rate_limit < 0:
            raise WorkloadConfigError("rate limits must be nonnegative")
        self.distribution.validate(self.num_keys)
        return self

    def generator_fingerprint(self) -> tuple:
        """Fields whose change requires rebuilding key generators."""
        return (
            self.num_keys,
            self.num_values,
            self.data_size,
            self.user_variable_data_size,
            self.distribution,
        )

    @classmethod
    def from_properties(cls, props: PropertySet | Mapping[str, str]) -> "WorkloadConfig":
        if isinstance(props, PropertySet):
            source = props
        else:
            source = PropertySet(defaults=props)
        base = cls()
        dist = DistributionSpec(
            kind=(source.get("distribution", base.distribution.kind) or UNIFORM).lower(),
            exponent=source.get_float("zipfianExponent", base.distribution.exponent),
            window_size=source.get_int("windowSize", base.distribution.window_size),
            advance_interval_seconds=source.get_float(
                "windowAdvanceSeconds", base.distribution.advance_interval_seconds
            ),
            inner=(source.get("windowInner", base.distribution.inner) or UNIFORM).lower(),
        )
        cfg = cls(
            num_keys=source.get_int("numKeys", base.num_keys),
            num_values=source.get_int("numValues", base.num_values),
            data_size=source.get_int("dataSize", base.data_size),
            num_writers=source.get_int("numWriters", base.num_writers),
            num_readers=source.get_int("numReaders", base.num_readers),
            write_enabled=source.get_bool("writeEnabled", base.write_enabled),
            read_enabled=source.get_bool("readEnabled", base.read_enabled),
            write_rate_limit=source.get_float("writeRateLimit", base.write_rate_limit),
            read_rate_limit=source.get_float("readRateLimit", base.read_rate_limit),
            user_variable_data_size=source.get_bool(
                "userVariableDataSize", base.user_variable_data_size
            ),
            distribution=dist,
        )
        return cfg.validate()

    def to_property_map(self) -> dict[str, str]:
        entries = {
            "numKeys": str(self.num_keys),
            "numValues": str(self.num_values),
            "dataSize": str(self.data_size),
            "numWriters": str(self.num_writers),
            "numReaders": str(self.num_readers),
            "writeEnabled": "true" if self.write_enabled else "false",
            "readEnabled": "true" if self.read_enabled else "false",
            "writeRateLimit": _format_rate(self.write_rate_limit),
            "readRateLimit": _format_rate(self.read_rate_limit),
            "userVariableDataSize": "true" if self.user_variable_data_size else "false",
            "distribution": self.distribution.kind,
        }
        if self.distribution.kind == ZIPFIAN or self.distribution.inner == ZIPFIAN:
            entries["zipfianExponent"] = repr(self.distribution.exponent)
        if self.distribution.kind == SLIDING_WINDOW:
            entries["windowSize"] = str(self.distribution.window_size)
            entries["windowAdvanceSeconds"] = repr(self.distribution.advance_interval_seconds)
            entries["windowInner"] = self.distribution.inner
        return entries

    def with_distribution(self, dist: DistributionSpec) -> "WorkloadConfig":
        return replace(self, distribution=dist)


def _format_rate(rate: float) -> str:
    return str(int(rate)) if float(rate).is_integer() else repr(rate)


# ---------------------------------------------------------------------------
# samplers


class ZipfSampler:
    """Draw ranks 1..n with probability proportional to 1/rank**s.

    Rejection inversion (Hormann & Derflinger): invert the integral of a
    dominating hull of the pmf, then accept/reject. Setup is O(1), each
    draw costs a handful of exp/log calls, and acceptance is high for
    the exponents used in workload modeling.
    """

    def __init__(self, n: int, exponent: float, rng: random.Random):
        if n < 1:
            raise ValueError("n must be >= 1")
        if exponent <= 0:
            raise ValueError("exponent must be positive")
        self.n = n
        self.s = float(exponent)
        self._rng = rng
        self._h_x1 = self._h_integral(1.5) - 1.0
        self._h_n = self._h_integral(n + 0.5)
        self._threshold = 2.0 - self._h_integral_inverse(self._h_integral(2.5) - self._h(2.0))

    def sample(self) -> int:
        rand = self._rng.random
        h_n = self._h_n
        span = self._h_x1 - h_n
        n = self.n
        threshold = self._threshold
        while True:
            u = h_n + rand() * span
            x = self._h_integral_inverse(u)
            k = int(x + 0.5)
            if k < 1:
                k = 1
            elif k > n:
                k = n
            if k - x <= threshold or u >= self._h_integral(k + 0.5) - self._h(k):
                return k

    def _h(self, x: float) -> float:
        return math.exp(-self.s * math.log(x))

    def _h_integral(self, x: float) -> float:
        log_x = math.log(x)
        return _expm1_over_x((1.0 - self.s) * log_x) * log_x

    def _h_integral_inverse(self, x: float) -> float:
        t = x * (1.0 - self.s)
        if t < -1.0:
            t = -1.0
        return math.exp(_log1p_over_x(t) * x)


def _log1p_over_x(x: float) -> float:
    if abs(x) > 1e-8:
        return math.log1p(x) / x
    return 1.0 - x * (0.5 - x * (1.0 / 3.0 - 0.25 * x))


def _expm1_over_x(x: float) -> float:
    if abs(x) > 1e-8:
        return math.expm1(x) / x
    return 1.0 + x * 0.5 * (1.0 + x / 3.0 * (1.0 + 0.25 * x))


def zipf_pmf(n: int, exponent: float) -> list[float]:
    """Analytic probability of each rank 1..n; reference for conformance checks."""
    weights = [1.0 / (rank**exponent) for rank in range(1, n + 1)]
    total = sum(weights)
    return [w / total for w in weights]


# ---------------------------------------------------------------------------
# key generation


class KeyGenerator:
    """Per-worker stateful key source. Single-owner; not thread-safe.

    Identical (seed, config, window epoch) and the same sequence of
    ``now`` values reproduce the identical key stream. For the sliding
    window, the offset is a pure function of ``now``: after k full
    advance intervals past ``window_epoch`` the window starts at
    (k * windowSize) mod numKeys, so every generator built from the same
    epoch stays aligned regardless of when it was constructed.
    """

    def __init__(self, config: WorkloadConfig, seed: int, window_epoch: float = 0.0):
        config.validate()
        self.config = config
        self.seed = seed
        self.window_epoch = window_epoch
        self.rng = random.Random(seed)
        dist = config.distribution
        self._window_offset = 0
        if dist.kind == ZIPFIAN:
            self._zipf = ZipfSampler(config.num_keys, dist.exponent, self.rng)
        elif dist.kind == SLIDING_WINDOW and dist.inner == ZIPFIAN:
            self._zipf = ZipfSampler(dist.window_size, dist.exponent, self.rng)
        else:
            self._zipf = None

    def next_key(self, now: float) -> str:
        return f"key-{self.next_key_index(now)}"

    def next_key_index(self, now: float) -> int:
        cfg = self.config
        dist = cfg.distribution
        if dist.kind == UNIFORM:
            return self.rng.randrange(cfg.num_keys)
        if dist.kind == ZIPFIAN:
            return self._zipf.sample() - 1
        offset = self.window_offset(now)
        if dist.inner == ZIPFIAN:
            within = self._zipf.sample() - 1
        else:
            within = self.rng.randrange(dist.window_size)
        return (offset + within) % cfg.num_keys

    def window_offset(self, now: float) -> int:
        dist = self.config.distribution
        if dist.kind != SLIDING_WINDOW:
            return 0
        elapsed = max(0.0, now - self.window_epoch)
        advances = int(elapsed // dist.advance_interval_seconds)
        self._window_offset = (advances * dist.window_size) % self.config.num_keys
        return self._window_offset

    def next_value_index(self) -> int:
        return self.rng.randrange(self.config.num_values)

    def next_payload(self) -> bytes:
        """Draw a value index (and length, when variable) and build the payload."""
        cfg = self.config
        return generate_payload(
            self.next_value_index(),
            cfg.data_size,
            cfg.user_variable_data_size,
            self.rng,
        )


def key_name(index: int) -> str:
    return f"key-{index}"


def key_index(name: str) -> int:
    if not name.startswith("key-"):
        raise ValueError(f"not a workload key: {name!r}")
    return int(name[4:])


# ---------------------------------------------------------------------------
# payloads


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


def generate_payload(
    value_index: int,
    data_size: int,
    variable: bool,
    rng: random.Random,
) -> bytes:
    """Build one value: total length dataSize, or uniform in [1, dataSize].

    The length draw consumes the caller's rng; the bytes themselves
    depend only on (value_index, length) so the same logical value can
    be regenerated anywhere for comparison.
    """
    length = rng.randint(1, data_size) if variable else data_size
    return payload_bytes(value_index, length)


def payload_bytes(value_index: int, length: int) -> bytes:
    """Deterministic payload of exactly ``length`` bytes.

    Payloads of 9+ bytes start with an 8-byte little-endian FNV-1a
    checksum of the remainder; shorter ones cannot fit the header and
    are emitted raw (validation treats them as unverifiable).
    """
    if length <= CHECKSUM_LEN:
        return _body_bytes(value_index, length)
    body = _body_bytes(value_index, length - CHECKSUM_LEN)
    return struct.pack("<Q", fnv1a64(body)) + body


def _body_bytes(value_index: int, length: int) -> bytes:
    seed = (value_index * 0x9E3779B97F4A7C15 + length) & _U64
    return random.Random(seed).randbytes(length)


def validate_payload(data: bytes) -> bool:
    """True unless a checksum header is present and does not match the body."""
    if len(data) <= CHECKSUM_LEN:
        return True
    (expected,) = struct.unpack_from("<Q", data)
    return fnv1a64(data[CHECKSUM_LEN:]) == expected
