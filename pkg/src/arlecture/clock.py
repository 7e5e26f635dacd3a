"""Clocks: all timestamps in the engine are milliseconds on a single clock.

The virtual clock makes sessions and benches bit-reproducible; the wall clock
backs live TCP sessions and the zero-delay latency bench.
"""

from __future__ import annotations

import time


class VirtualClock:
    """Deterministic clock; time moves only when explicitly advanced."""

    def __init__(self, start_ms: float = 0.0):
        self._now = float(start_ms)

    def now_ms(self) -> float:
        return self._now

    def advance(self, delta_ms: float) -> float:
        if delta_ms < 0:
            raise ValueError("clock cannot go backwards")
        self._now += delta_ms
        return self._now

    def advance_to(self, t_ms: float) -> float:
        if t_ms < self._now:
            raise ValueError("clock cannot go backwards")
        self._now = float(t_ms)
        return self._now


class WallClock:
    """Monotonic wall time in ms, zeroed at construction."""

    def __init__(self):
        self._t0 = time.perf_counter()

    def now_ms(self) -> float:
        return (time.perf_counter() - self._t0) * 1000.0
