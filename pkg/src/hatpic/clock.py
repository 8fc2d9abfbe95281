"""Injectable time sources.

Loops take a clock instead of calling time functions directly, so the
same code paces against the wall clock in live mode and runs
deterministically (and as fast as the CPU allows) under test.
"""

from __future__ import annotations

import time


class WallClock:
    """Monotonic wall time; sleep really sleeps."""

    def now(self) -> float:
        return time.perf_counter()

    def sleep_until(self, deadline: float) -> None:
        remaining = deadline - time.perf_counter()
        if remaining > 0:
            time.sleep(remaining)


class SimClock:
    """Tick-on-demand simulated time; sleep just advances the counter."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> float:
        if dt < 0:
            raise ValueError("simulated time cannot move backwards")
        self._now += dt
        return self._now

    def sleep_until(self, deadline: float) -> None:
        if deadline > self._now:
            self._now = deadline
