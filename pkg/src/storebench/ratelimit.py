"""Token-bucket rate limiting shared by a node's worker pool."""

from __future__ import annotations

import threading
import time


def default_burst(rate: float) -> int:
    """100 ms worth of tokens, at least one: smooths scheduler jitter
    without letting windowed throughput drift."""
    return max(1, int(rate / 10))


class TokenBucket:
    """Continuous-refill token bucket.

    Tokens accrue at ``rate`` per second up to ``burst`` and never
    beyond, so ops granted in any window of length T are bounded by
    rate*T + burst. A rate of zero grants nothing (acquire simply times
    out); retargeting the rate takes effect on the next refill.
    """

    def __init__(self, rate: float, burst: int | None = None):
        if rate < 0:
            raise ValueError("rate must be nonnegative")
        self._rate = float(rate)
        self._burst = float(burst if burst is not None else default_burst(rate))
        if self._burst < 1:
            raise ValueError("burst must be at least 1")
        self._tokens = self._burst
        self._last_refill = time.monotonic()
        self._lock = threading.Lock()

    @property
    def rate(self) -> float:
        with self._lock:
            return self._rate

    @property
    def burst(self) -> int:
        with self._lock:
            return int(self._burst)

    def set_rate(self, rate: float, burst: int | None = None) -> None:
        """Retarget without disturbing waiters; tokens clamp to the new burst."""
        if rate < 0:
            raise ValueError("rate must be nonnegative")
        with self._lock:
            self._refill_locked(time.monotonic())
            self._rate = float(rate)
            self._burst = float(burst if burst is not None else default_burst(rate))
            self._tokens = min(self._tokens, self._burst)

    def try_acquire(self) -> bool:
        with self._lock:
            self._refill_locked(time.monotonic())
            if self._tokens >= 1.0:
                self._tokens -= 1.0
                return True
            return False

    def acquire(self, timeout: float | None = None) -> bool:
        """Block until a token is granted; False on timeout.

        Waits are computed from the deficit, so a waiter sleeps roughly
        one inter-token interval per retry rather than spinning.
        """
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            now = time.monotonic()
            with self._lock:
                self._refill_locked(now)
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return True
                wait = (1.0 - self._tokens) / self._rate if self._rate > 0 else None
            if deadline is not None:
                remaining = deadline - now
                if remaining <= 0:
                    return False
                wait = remaining if wait is None else min(wait, remaining)
            elif wait is None:
                wait = 0.25
            time.sleep(min(wait, 0.25))

    def _refill_locked(self, now: float) -> None:
        elapsed = now - self._last_refill
        if elapsed > 0:
            self._tokens = min(self._burst, self._tokens + elapsed * self._rate)
        self._last_refill = now
