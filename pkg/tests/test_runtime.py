from __future__ import annotations

import pytest

from hearth.catalog import default_catalog
from hearth.errors import ProgramNotFoundError, ProgramStateError
from hearth.language.grammar import derive_grammar
from hearth.language.parser import parse
from hearth.registry import HomeEvent
from hearth.runtime import DEGRADED, RUNNING, STOPPED, Runtime
from hearth.trace import TimelineQuery

from conftest import make_home

XMAS = (
    "program XmasTree "
    "switch off the tv-plug blink the tree-lamp "
    "each time the clock strikes 23:00 do switch off the tree-lamp "
    "each time the clock strikes 07:00 do switch on the tree-lamp"
)

H23 = 23 * 3600 * 1000
H7 = 7 * 3600 * 1000


def load_text(rt: Runtime, text: str, known=()):
    grammar = derive_grammar(rt.registry.snapshot(), known_programs=known)
    program = parse(text, grammar)
    rt.load_program(program)
    return program.program_id


def test_start_xmastree_sets_indicators(runtime):
    pid = load_text(runtime, XMAS)
    snap = runtime.start(pid)
    assert snap.status == RUNNING
    assert snap.stmt_counters == {"imperative[0]": 1, "imperative[1]": 1}
    assert snap.rule_counters == {0: 0, 1: 0}
    assert snap.waiting_points == (0, 1)
    assert snap.unknown_refs == ()


def test_start_rules_only_program(runtime):
    pid = load_text(runtime, "program Evening each time the blue-lamp is turned on do blink the tree-lamp")
    snap = runtime.start(pid)
    assert snap.status == RUNNING
    assert snap.stmt_counters == {}
    assert snap.waiting_points == (0,)


def test_start_with_missing_device_is_degraded(runtime):
    pid = load_text(runtime, XMAS)
    runtime.unregister_device("lamp-tree")
    snap = runtime.start(pid)
    assert snap.status == DEGRADED
    assert "imperative[1].selector" in snap.unknown_refs
    # the missing blink was skipped and traced as degraded
    skips = [e for e in runtime.trace.entries if e.category == "degraded-skip"]
    assert len(skips) == 1 and skips[0].subject == "lamp-tree"


def test_start_errors(runtime):
    with pytest.raises(ProgramNotFoundError):
        runtime.start("ghost")
    pid = load_text(runtime, XMAS)
    runtime.start(pid)
    with pytest.raises(ProgramStateError):
        runtime.start(pid)


def test_stop_empties_waiting_points_and_freezes_counters(runtime):
    pid = load_text(runtime, XMAS)
    runtime.start(pid)
    # lazy ticks: exactly the armed strike times are scheduled
    assert {t.purpose for t in runtime.clock.pending()} == {"tick"}
    snap = runtime.stop(pid)
    assert snap.status == STOPPED
    assert snap.waiting_points == ()
    assert snap.stmt_counters == {"imperative[0]": 1, "imperative[1]": 1}
    assert runtime.clock.pending() == []  # unreferenced ticks are cancelled
    with pytest.raises(ProgramStateError):
        runtime.stop(pid)


def test_rule_body_stop_other_is_synchronous(runtime):
    b = load_text(runtime, "program Bee each time the clock strikes 11:00 do blink the desk-lamp")
    a = load_text(
        runtime,
        "program Aye each time the front-door is opened do stop program Bee blink the tree-lamp",
        known=[("Bee", "Bee")],
    )
    runtime.start(a)
    runtime.start(b)
    runtime.ingest_event(HomeEvent(source="door", event_type="opened", payload={}, at=0))
    # B's stop entry must precede A's next statement (the blink action)
    cats = [(e.category, e.subject, e.details.get("op")) for e in runtime.trace.entries]
    stop_idx = cats.index(("program-lifecycle", "Bee", "stopped"))
    blink_idx = next(
        i
        for i, e in enumerate(runtime.trace.entries)
        if e.category == "action" and e.details.get("statement") == "rules[0].body[1]"
    )
    assert stop_idx < blink_idx
    assert runtime.snapshot(b).status == STOPPED


def test_stop_self_skips_remaining_statements(runtime):
    pid = load_text(
        runtime,
        "program Once each time the front-door is opened do blink the tree-lamp "
        "stop program Once switch on the blue-lamp",
        known=[("Once", "Once")],
    )
    runtime.start(pid)
    runtime.ingest_event(HomeEvent(source="door", event_type="opened", payload={}, at=0))
    snap = runtime.snapshot(pid)
    # trace oracle: blink executed, stop executed, switch-on never ran
    assert snap.stmt_counters.get("rules[0].body[0]") == 1
    assert snap.stmt_counters.get("rules[0].body[1]") == 1
    assert "rules[0].body[2]" not in snap.stmt_counters
    assert snap.status == STOPPED
    actions = [e.details["action"] for e in runtime.trace.entries if e.category == "action"]
    assert "switch-on" not in actions


def test_dispatch_single_match(runtime):
    pid = load_text(runtime, "program P each time the blue-lamp is turned on do blink the tree-lamp")
    runtime.start(pid)
    ev = runtime.registry.ingest_event(
        HomeEvent(source="lamp-blue", event_type="turned-on", payload={}, at=0)
    )
    firings = runtime.dispatch(ev)
    assert len(firings) == 1
    assert (firings[0].program_id, firings[0].rule_index) == (pid, 0)


def test_dispatch_orders_by_start_order_then_rule_index(runtime):
    p2 = load_text(runtime, "program P2 each time all lamp is turned on do blink the tree-lamp")
    p1 = load_text(
        runtime,
        "program P1 "
        "each time the blue-lamp is turned off do blink the tree-lamp "
        "each time the blue-lamp is turned on do blink the desk-lamp",
    )
    runtime.start(p2)  # started first
    runtime.start(p1)
    ev = runtime.registry.ingest_event(
        HomeEvent(source="lamp-blue", event_type="turned-on", payload={}, at=0)
    )
    firings = runtime.dispatch(ev)
    assert [(f.program_id, f.rule_index) for f in firings] == [("P2", 0), ("P1", 1)]


def test_state_trigger_is_edge_not_level(runtime):
    pid = load_text(
        runtime,
        "program Guard if the front-door open is true do blink the tree-lamp",
    )
    runtime.ingest_event(HomeEvent(source="door", event_type="opened", payload={}, at=0))
    runtime.start(pid)  # condition is ALREADY true at arm time: no firing
    assert runtime.snapshot(pid).rule_counters[0] == 0
    # unrelated event while the condition stays true: still no firing
    runtime.ingest_event(HomeEvent(source="cube", event_type="face-changed", payload={"face": 2}, at=0))
    assert runtime.snapshot(pid).rule_counters[0] == 0
    # falling then rising edge: exactly one firing
    runtime.ingest_event(HomeEvent(source="door", event_type="closed", payload={}, at=0))
    runtime.ingest_event(HomeEvent(source="door", event_type="opened", payload={}, at=0))
    assert runtime.snapshot(pid).rule_counters[0] == 1


def test_fire_rule_over_two_bedroom_lamps(runtime):
    pid = load_text(
        runtime,
        "program Sweep each time the front-door is opened do switch off all lamp located in bedroom",
    )
    runtime.start(pid)
    runtime.ingest_event(HomeEvent(source="door", event_type="opened", payload={}, at=0))
    snap = runtime.snapshot(pid)
    assert snap.rule_counters[0] == 1
    actions = [
        e
        for e in runtime.trace.entries
        if e.category == "action" and e.details.get("statement") == "rules[0].body[0]"
    ]
    assert sorted(e.subject for e in actions) == ["lamp-blue", "lamp-desk"]
    assert snap.stmt_counters["rules[0].body[0]"] == 2  # one per reached device


def test_missing_reference_skips_but_continues(runtime):
    pid = load_text(
        runtime,
        "program Robust each time the front-door is opened do "
        "blink the tree-lamp switch on the blue-lamp",
    )
    runtime.start(pid)
    runtime.unregister_device("lamp-tree")
    runtime.ingest_event(HomeEvent(source="door", event_type="opened", payload={}, at=0))
    snap = runtime.snapshot(pid)
    assert snap.status == DEGRADED
    skips = [e for e in runtime.trace.entries if e.category == "degraded-skip"]
    assert len(skips) == 1
    assert skips[0].details["statement"] == "rules[0].body[0]"
    # the second statement still executed
    assert snap.stmt_counters["rules[0].body[1]"] == 1
    assert runtime.registry.read_state("lamp-blue", "power").value == "on"


def test_start_statement_runs_target_in_same_step(runtime):
    load_text(runtime, "program Child blink the tree-lamp each time the clock strikes 12:00 do blink the tree-lamp")
    pid = load_text(
        runtime,
        "program Parent each time the front-door is opened do start program Child",
        known=[("Child", "Child")],
    )
    runtime.start(pid)
    runtime.ingest_event(HomeEvent(source="door", event_type="opened", payload={}, at=0))
    child = runtime.snapshot("Child")
    assert child.status == RUNNING
    assert child.stmt_counters == {"imperative[0]": 1}
    # starting an already-running program is a traced no-op
    runtime.ingest_event(HomeEvent(source="door", event_type="opened", payload={}, at=0))
    skipped = [
        e
        for e in runtime.trace.entries
        if e.category == "program-lifecycle" and e.details.get("op") == "start-skipped"
    ]
    assert len(skipped) == 1 and skipped[0].details["reason"] == "already-running"


def test_wait_resumes_exactly_at_due_time(runtime):
    pid = load_text(
        runtime,
        "program Slow blink the tree-lamp wait 5 seconds switch on the tree-lamp "
        "each time the clock strikes 12:00 do blink the tree-lamp",
    )
    runtime.start(pid)
    snap = runtime.snapshot(pid)
    assert snap.stmt_counters == {"imperative[0]": 1, "imperative[1]": 1}
    runtime.advance(4_999)
    assert "imperative[2]" not in runtime.snapshot(pid).stmt_counters
    runtime.advance(5_000)
    snap = runtime.snapshot(pid)
    assert snap.stmt_counters["imperative[2]"] == 1
    on_at = [
        e.at
        for e in runtime.trace.entries
        if e.category == "action" and e.details.get("statement") == "imperative[2]"
    ]
    assert on_at == [5_000]


def test_clock_rule_fires_once_per_strike(runtime):
    pid = load_text(runtime, XMAS)
    runtime.start(pid)
    runtime.advance(H23 + 60_000)
    snap = runtime.snapshot(pid)
    assert snap.rule_counters == {0: 1, 1: 1}  # 07:00 and 23:00 each hit once
    runtime.advance(H23 + 24 * 3600 * 1000)  # one more day: each strikes again
    snap = runtime.snapshot(pid)
    assert snap.rule_counters == {0: 2, 1: 2}


def test_advance_with_empty_queues_is_frame_axiom(runtime):
    before = runtime.state_fingerprint(exclude_now=True)
    now_before = runtime.clock.now
    runtime.advance(10_000)
    assert runtime.clock.now == 10_000 != now_before
    assert runtime.state_fingerprint(exclude_now=True) == before


def test_snapshot_unknown_program_errors(runtime):
    with pytest.raises(ProgramNotFoundError):
        runtime.snapshot("ghost")


def test_degraded_recovers_on_reappearance(runtime):
    pid = load_text(runtime, XMAS)
    runtime.start(pid)
    runtime.unregister_device("lamp-tree")
    assert runtime.snapshot(pid).status == DEGRADED
    from hearth.registry import DeviceDescriptor

    runtime.register_device(
        DeviceDescriptor(id="lamp-tree", kind="lamp", display_name="tree-lamp", location="salon")
    )
    snap = runtime.snapshot(pid)
    assert snap.status == RUNNING
    assert snap.unknown_refs == ()


def test_auto_stop_when_no_rules(runtime):
    pid = load_text(runtime, "program OneShot blink the tree-lamp switch on the blue-lamp")
    snap = runtime.start(pid)
    assert snap.status == STOPPED
    stops = [
        e
        for e in runtime.trace.entries
        if e.category == "program-lifecycle" and e.details.get("op") == "stopped"
    ]
    assert stops and stops[0].details.get("reason") == "completed"


def test_critical_denial_during_program_run(runtime):
    pid = load_text(
        runtime,
        "program Cut each time the front-door is opened do switch off the fridge-plug",
    )
    runtime.start(pid)
    runtime.ingest_event(HomeEvent(source="door", event_type="opened", payload={}, at=0))
    snap = runtime.snapshot(pid)
    assert snap.status == RUNNING  # denial does not degrade
    denials = [e for e in runtime.trace.entries if e.category == "denial"]
    assert len(denials) == 1 and denials[0].cause == pid
    assert runtime.registry.read_state("plug-fridge", "power").value == "on"
    # denied executions do not count as effectful statement runs
    assert "rules[0].body[0]" not in snap.stmt_counters


def counter_conservation_check(runtime, pid):
    """Invariant: counters equal the statement/rule entries in the trace.

    Counters reset on start, so only entries since the last `started`
    lifecycle entry of the program count.
    """
    snap = runtime.snapshot(pid)
    starts = [
        e.seq
        for e in runtime.trace.entries
        if e.category == "program-lifecycle"
        and e.subject == pid
        and e.details.get("op") == "started"
    ]
    since = starts[-1] if starts else -1
    entries = [e for e in runtime.trace.entries if e.seq >= since]
    for ridx, count in snap.rule_counters.items():
        fired = [
            e
            for e in entries
            if e.category == "rule-fired" and e.subject == pid and e.details["rule"] == ridx
        ]
        assert len(fired) == count
    by_path: dict[str, int] = {}
    for e in entries:
        stmt = e.details.get("statement")
        if stmt is None or e.cause != pid:
            continue
        if e.category == "action":
            by_path[stmt] = by_path.get(stmt, 0) + 1
        elif e.category == "program-lifecycle" and e.details.get("op") in (
            "started",
            "stopped",
            "start-skipped",
            "stop-skipped",
            "wait",
        ):
            by_path[stmt] = by_path.get(stmt, 0) + 1
    assert by_path == dict(snap.stmt_counters)


def test_counter_conservation_after_busy_run(runtime):
    pid = load_text(runtime, XMAS)
    runtime.start(pid)
    runtime.advance(H23 + 3600 * 1000)
    runtime.ingest_event(HomeEvent(source="door", event_type="opened", payload={}, at=runtime.clock.now))
    counter_conservation_check(runtime, pid)


def test_counter_conservation_across_restart(runtime):
    pid = load_text(runtime, XMAS)
    runtime.start(pid)
    runtime.advance(H23 + 60_000)
    assert runtime.snapshot(pid).rule_counters == {0: 1, 1: 1}
    runtime.stop(pid)
    runtime.start(pid)  # counters reset; conservation scopes to this run
    snap = runtime.snapshot(pid)
    assert snap.rule_counters == {0: 0, 1: 0}
    assert snap.stmt_counters == {"imperative[0]": 1, "imperative[1]": 1}
    counter_conservation_check(runtime, pid)


def test_impossible_scenario_step_traced_not_fatal(runtime):
    # a scripted register colliding with a present device must not wedge time
    runtime.clock.schedule(
        due=1000,
        owner="scenario",
        purpose="scenario",
        payload={
            "at": 1000, "op": "register", "id": "lamp-blue", "kind": "lamp",
            "name": "dupe", "state": {"power": "off", "color": "red"},
        },
    )
    runtime.clock.schedule(
        due=2000, owner="scenario", purpose="scenario",
        payload={"at": 2000, "op": "marker", "label": "after"},
    )
    runtime.advance(3000)
    ops = [e.details.get("op") for e in runtime.trace.entries if e.subject == "scenario"]
    assert ops == ["scenario-error", "marker"]  # error traced, play continued


def replay_rising_edges(entries, condition_eval):
    """Brute-force replay: recompute the condition after every trace entry."""
    states: dict[str, dict] = {}
    availability: dict[str, str] = {}
    edges = 0
    last = False
    for e in entries:
        if e.category == "registry-change":
            if e.details["change"] == "registered":
                availability[e.subject] = "available"
                states.setdefault(e.subject, {}).update(e.details.get("state", {}))
            elif e.details["change"] == "unregistered":
                availability[e.subject] = "missing"
        elif e.category == "state-change":
            states.setdefault(e.subject, {}).update(e.details["changes"])
        value = condition_eval(states, availability)
        if value and not last:
            edges += 1
        last = value
    return edges


def test_edge_trigger_firings_bounded_by_replayed_transitions(runtime):
    pid = load_text(
        runtime, "program Guard if the front-door open is true do blink the tree-lamp"
    )
    runtime.start(pid)
    pattern = ["opened", "opened", "closed", "opened", "closed", "closed", "opened"]
    for ev in pattern:
        runtime.ingest_event(HomeEvent(source="door", event_type=ev, payload={}, at=0))

    def door_open(states, availability):
        return availability.get("door") == "available" and states.get("door", {}).get("open") is True

    edges = replay_rising_edges(runtime.trace.entries, door_open)
    fired = runtime.snapshot(pid).rule_counters[0]
    assert fired <= edges
    assert fired == edges == 3  # armed closed; three distinct rising edges


def test_determinism_same_inputs_same_trace(catalog):
    def run():
        rt = Runtime(catalog)
        make_home(rt.registry)
        pid = load_text(rt, XMAS)
        rt.start(pid)
        rt.ingest_event(HomeEvent(source="door", event_type="opened", payload={}, at=0))
        rt.advance(H23 + 120_000)
        rt.unregister_device("lamp-tree")
        rt.advance(2 * 24 * 3600 * 1000)
        return rt.trace.content_hash()

    assert run() == run()
