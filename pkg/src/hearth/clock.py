"""Simulated clock and timer queue.

Time is integer milliseconds since scenario start; nothing in the core ever
reads the wall clock.  Timers pop in (due time, schedule order), which makes
every run with the same inputs process the same sequence.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional

from .errors import TimeRegressionError

SIMULATED = "simulated"
ACCELERATED = "accelerated"
REALTIME = "realtime"

MODES = (SIMULATED, ACCELERATED, REALTIME)

MS_PER_DAY = 24 * 60 * 60 * 1000


def time_of_day_ms(text: str) -> int:
    """Milliseconds after midnight for an HH:MM string."""
    hh, mm = text.split(":")
    return (int(hh) * 60 + int(mm)) * 60 * 1000


def next_occurrence(now: int, time_text: str) -> int:
    """First simulated instant strictly after `now` that reads HH:MM."""
    offset = time_of_day_ms(time_text)
    day = now // MS_PER_DAY
    candidate = day * MS_PER_DAY + offset
    if candidate <= now:
        candidate += MS_PER_DAY
    return candidate


@dataclass(order=True)
class _Timer:
    due: int
    seq: int
    owner: str = field(compare=False)
    purpose: str = field(compare=False)
    payload: object = field(compare=False, default=None)
    cancelled: bool = field(compare=False, default=False)


class SimClock:
    def __init__(self, now: int = 0, mode: str = SIMULATED, factor: float = 10.0):
        self.now = now
        self.mode = mode
        self.factor = factor
        self._heap: list[_Timer] = []
        self._seq = 0

    def set_mode(self, mode: str, factor: Optional[float] = None) -> None:
        if mode not in MODES:
            raise ValueError(f"unknown clock mode {mode!r}")
        self.mode = mode
        if factor is not None:
            if factor <= 0:
                raise ValueError("factor must be positive")
            self.factor = factor

    def schedule(self, due: int, owner: str, purpose: str, payload: object = None) -> _Timer:
        if due < self.now:
            raise TimeRegressionError(f"timer at {due} is before now {self.now}")
        timer = _Timer(due=due, seq=self._seq, owner=owner, purpose=purpose, payload=payload)
        self._seq += 1
        heapq.heappush(self._heap, timer)
        return timer

    def cancel_where(self, predicate) -> int:
        n = 0
        for t in self._heap:
            if not t.cancelled and predicate(t):
                t.cancelled = True
                n += 1
        return n

    def pending(self) -> list[_Timer]:
        return sorted((t for t in self._heap if not t.cancelled), key=lambda t: (t.due, t.seq))

    def peek_due(self) -> Optional[int]:
        while self._heap and self._heap[0].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0].due if self._heap else None

    def pop_due(self, to: int) -> Optional[_Timer]:
        """Next timer with due <= to; advances now to its due time."""
        while True:
            due = self.peek_due()
            if due is None or due > to:
                return None
            timer = heapq.heappop(self._heap)
            if timer.cancelled:
                continue
            self.now = max(self.now, timer.due)
            return timer

    def settle(self, to: int) -> None:
        if to < self.now:
            raise TimeRegressionError(f"cannot move clock back from {self.now} to {to}")
        self.now = to
