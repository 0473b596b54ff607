"""Clock abstraction: wall time for serving, simulated time for benchmarks.

The simulated clock advances only when told to, one millisecond per
scheduling step by default, which makes every timestamp in a benchmark
run (and therefore the emitted CSV) bit-reproducible.
"""

from __future__ import annotations

import time


class SimClock:
    """Manually advanced clock for deterministic runs."""

    def __init__(self, start_ms: int = 0):
        self._now_ms = int(start_ms)

    @property
    def now_ms(self) -> int:
        return self._now_ms

    @property
    def now_s(self) -> int:
        return self._now_ms // 1000

    def step(self, ms: int = 1) -> int:
        self._now_ms += int(ms)
        return self._now_ms

    def advance_to(self, ms: int) -> int:
        if ms > self._now_ms:
            self._now_ms = int(ms)
        return self._now_ms


class WallClock:
    """Real time; used by the HTTP gateway and CLI."""

    @property
    def now_ms(self) -> int:
        return int(time.time() * 1000)

    @property
    def now_s(self) -> int:
        return int(time.time())
