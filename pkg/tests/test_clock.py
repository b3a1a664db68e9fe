from __future__ import annotations

import pytest

from hearth.clock import MS_PER_DAY, SimClock, next_occurrence, time_of_day_ms
from hearth.errors import TimeRegressionError


def test_timers_pop_in_due_then_fifo_order():
    clock = SimClock()
    clock.schedule(100, owner="a", purpose="x")
    clock.schedule(50, owner="b", purpose="x")
    clock.schedule(100, owner="c", purpose="x")
    clock.schedule(100, owner="d", purpose="x")
    popped = []
    while True:
        t = clock.pop_due(200)
        if t is None:
            break
        popped.append((t.due, t.owner))
    assert popped == [(50, "b"), (100, "a"), (100, "c"), (100, "d")]
    assert clock.now == 100
    clock.settle(200)
    assert clock.now == 200


def test_pop_due_respects_bound():
    clock = SimClock()
    clock.schedule(100, owner="a", purpose="x")
    assert clock.pop_due(99) is None
    assert clock.now == 0


def test_cancel_where():
    clock = SimClock()
    clock.schedule(10, owner="a", purpose="resume")
    clock.schedule(20, owner="b", purpose="resume")
    assert clock.cancel_where(lambda t: t.owner == "a") == 1
    t = clock.pop_due(100)
    assert t.owner == "b"


def test_time_regression_rejected():
    clock = SimClock(now=500)
    with pytest.raises(TimeRegressionError):
        clock.schedule(499, owner="a", purpose="x")
    with pytest.raises(TimeRegressionError):
        clock.settle(100)


def test_time_of_day_helpers():
    assert time_of_day_ms("00:00") == 0
    assert time_of_day_ms("23:00") == 23 * 3600 * 1000
    assert next_occurrence(0, "23:00") == 23 * 3600 * 1000
    # strictly in the future: at exactly 23:00, the next strike is tomorrow
    at = 23 * 3600 * 1000
    assert next_occurrence(at, "23:00") == at + MS_PER_DAY
    assert next_occurrence(at + 1, "07:00") == MS_PER_DAY + 7 * 3600 * 1000
