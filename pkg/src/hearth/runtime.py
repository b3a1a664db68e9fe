"""Deterministic interpreter: one logical loop owns all runtime state.

External commands (dashboard, scenario driver, gateway) perform their
registry work, enqueue follow-up processing, and drain the work queue;
draining is reentrancy-guarded so nested operations (a rule body starting
another program, a scenario step inside clock advancement) serialize into
one total order.  Identical inputs therefore produce identical traces.

Rule semantics: event triggers fire per matching occurrence; state triggers
fire on the rising edge of their condition, re-evaluated after each event's
state effects land.  Both kinds re-arm immediately.
"""

from __future__ import annotations

import hashlib
import json
import time as _wall
from collections import deque
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

from .catalog import Catalog, domain_sort_key
from .clock import ACCELERATED, SIMULATED, SimClock, next_occurrence
from .errors import (
    CriticalDeviceDeniedError,
    HearthError,
    MissingDeviceError,
    ProgramNotFoundError,
    ProgramStateError,
)
from .language.nodes import (
    ActionStatement,
    And,
    Atom,
    ById,
    EventTrigger,
    Not,
    Or,
    Program,
    StartStatement,
    StateTrigger,
    StopStatement,
    WaitStatement,
    selector_paths,
)
from .registry import AVAILABLE, DeviceDescriptor, HomeEvent, Registry
from .trace import TraceLog

STOPPED = "stopped"
RUNNING = "running"
DEGRADED = "degraded"

CLOCK_KIND = "clock-service"
CLOCK_EVENT = "strikes"


@dataclass(frozen=True)
class Firing:
    program_id: str
    rule_index: int
    trigger: dict
    at: int


@dataclass(frozen=True)
class InstanceSnapshot:
    program_id: str
    name: str
    status: str  # maps to UI glyphs: running=green triangle, degraded=orange, stopped=square
    stmt_counters: Mapping[str, int]
    rule_counters: Mapping[int, int]
    waiting_points: tuple[int, ...]
    unknown_refs: tuple[str, ...]
    at: int

    def to_json(self) -> dict:
        return {
            "program_id": self.program_id,
            "name": self.name,
            "status": self.status,
            "stmt_counters": dict(self.stmt_counters),
            "rule_counters": {str(k): v for k, v in self.rule_counters.items()},
            "waiting_points": list(self.waiting_points),
            "unknown_refs": list(self.unknown_refs),
            "at": self.at,
        }


class _Instance:
    def __init__(self, program: Program, start_order: int):
        self.program = program
        self.status = RUNNING
        self.start_order = start_order
        self.stmt_counters: dict[str, int] = {}
        self.rule_counters: dict[int, int] = {i: 0 for i in range(len(program.rules))}
        self.armed: set[int] = set(range(len(program.rules)))
        self.state_last: dict[int, bool] = {}
        self.unknown_refs: set[str] = set()
        self.imperative_done = False


class Runtime:
    def __init__(
        self,
        catalog: Catalog,
        trace: Optional[TraceLog] = None,
        clock: Optional[SimClock] = None,
        on_snapshot_change: Optional[Callable[[InstanceSnapshot], None]] = None,
    ):
        self.clock = clock or SimClock()
        self.trace = trace or TraceLog()
        self.registry = Registry(
            catalog, clock=lambda: self.clock.now, trace=self.trace, notify=self._on_delta
        )
        self.programs: dict[str, Program] = {}
        self.instances: dict[str, _Instance] = {}
        self._start_counter = 0
        self._work: deque = deque()
        self._draining = False
        self._tick_timers: dict[tuple[str, str], object] = {}
        self._on_snapshot_change = on_snapshot_change
        self._registry_listeners: list[Callable[[object], None]] = []

    # -- wiring ---------------------------------------------------------------

    def subscribe_registry(self, listener: Callable[[object], None]) -> None:
        self._registry_listeners.append(listener)

    def _on_delta(self, delta) -> None:
        for listener in self._registry_listeners:
            listener(delta)

    def _notify_snapshot(self, program_id: str) -> None:
        if self._on_snapshot_change is not None and program_id in self.instances:
            self._on_snapshot_change(self.snapshot(program_id))

    # -- program storage (in-memory view; the gateway persists) ---------------

    def load_program(self, program: Program) -> None:
        inst = self.instances.get(program.program_id)
        if inst is not None and inst.status != STOPPED:
            raise ProgramStateError(f"{program.program_id!r} is running; stop it first")
        self.programs[program.program_id] = program
        self.instances.pop(program.program_id, None)

    def remove_program(self, program_id: str) -> None:
        inst = self.instances.get(program_id)
        if inst is not None and inst.status != STOPPED:
            raise ProgramStateError(f"{program_id!r} is running; stop it first")
        self.programs.pop(program_id, None)
        self.instances.pop(program_id, None)

    # -- registry commands ------------------------------------------------------

    def register_device(self, descriptor: DeviceDescriptor, initial_state=None, cause: str = "scenario"):
        delta = self.registry.register_device(descriptor, initial_state, cause=cause)
        self._after_registry_change()
        self._drain()
        return delta

    def unregister_device(self, device_id: str, cause: str = "scenario"):
        delta = self.registry.unregister_device(device_id, cause=cause)
        self._after_registry_change()
        self._drain()
        return delta

    def set_critical(self, device_id: str, critical: bool, cause: str = "scenario"):
        delta = self.registry.set_critical(device_id, critical, cause=cause)
        self._after_registry_change()
        self._drain()
        return delta

    def device_action(self, device_id: str, action: str, args=None, cause: str = "dashboard"):
        delta, events = self.registry.apply_action(device_id, action, args, cause=cause)
        for ev in events:
            self._work.append(("event", ev))
        self._drain()
        return delta

    def ingest_event(self, event: HomeEvent, cause: str = "scenario") -> None:
        event = self.registry.ingest_event(event, cause=cause)
        self._work.append(("event", event))
        self._drain()

    # -- lifecycle ---------------------------------------------------------------

    def start(self, program_id: str, cause: str = "dashboard", statement: Optional[str] = None):
        program = self.programs.get(program_id)
        if program is None:
            raise ProgramNotFoundError(f"no stored program {program_id!r}")
        inst = self.instances.get(program_id)
        if inst is not None and inst.status != STOPPED:
            raise ProgramStateError(f"{program_id!r} already running")
        if not program.imperative and not program.rules:
            raise ProgramStateError(f"{program_id!r} has no statements and no rules")
        inst = _Instance(program, start_order=self._start_counter)
        self._start_counter += 1
        self.instances[program_id] = inst
        details = {"op": "started"}
        if statement is not None:
            details["statement"] = statement
        self.trace.record(
            at=self.clock.now,
            category="program-lifecycle",
            subject=program_id,
            details=details,
            cause=cause,
        )
        self._refresh_unknown_refs(inst, trace_transition=False)
        for ridx in sorted(inst.armed):
            rule = program.rules[ridx]
            if isinstance(rule.trigger, StateTrigger):
                inst.state_last[ridx] = self._eval_condition(rule.trigger.condition)
        self._sync_tick_timers()
        self._exec_statements(inst, rule_index=None, start_idx=0)
        self._notify_snapshot(program_id)
        self._drain()
        return self.snapshot(program_id)

    def stop(
        self,
        program_id: str,
        cause: str = "dashboard",
        statement: Optional[str] = None,
        reason: Optional[str] = None,
    ):
        inst = self.instances.get(program_id)
        if inst is None or inst.status == STOPPED:
            raise ProgramStateError(f"{program_id!r} is not running")
        inst.status = STOPPED
        inst.armed.clear()
        inst.state_last.clear()
        # pending firings and suspended continuations of this instance die now
        self._work = deque(
            item
            for item in self._work
            if not (item[0] in ("firing", "resume") and item[1] == program_id)
        )
        self.clock.cancel_where(
            lambda t: t.owner == f"prog:{program_id}" and t.purpose == "resume"
        )
        details = {"op": "stopped"}
        if statement is not None:
            details["statement"] = statement
        if reason is not None:
            details["reason"] = reason
        self.trace.record(
            at=self.clock.now,
            category="program-lifecycle",
            subject=program_id,
            details=details,
            cause=cause,
        )
        self._sync_tick_timers()
        self._notify_snapshot(program_id)
        self._drain()
        return self.snapshot(program_id)

    def snapshot(self, program_id: str) -> InstanceSnapshot:
        inst = self.instances.get(program_id)
        program = self.programs.get(program_id)
        if inst is None:
            if program is None:
                raise ProgramNotFoundError(f"no stored program {program_id!r}")
            return InstanceSnapshot(
                program_id=program_id,
                name=program.name,
                status=STOPPED,
                stmt_counters={},
                rule_counters={i: 0 for i in range(len(program.rules))},
                waiting_points=(),
                unknown_refs=(),
                at=self.clock.now,
            )
        return InstanceSnapshot(
            program_id=program_id,
            name=inst.program.name,
            status=inst.status,
            stmt_counters=dict(inst.stmt_counters),
            rule_counters=dict(inst.rule_counters),
            waiting_points=tuple(sorted(inst.armed)) if inst.status != STOPPED else (),
            unknown_refs=tuple(sorted(inst.unknown_refs)),
            at=self.clock.now,
        )

    # -- clock ---------------------------------------------------------------------

    def advance(self, to: int) -> list[dict]:
        if self.clock.mode != SIMULATED:
            raise ProgramStateError(f"advance requires simulated mode, not {self.clock.mode}")
        return self._advance_to(to)

    def run_accelerated(self, to: int, poll_s: float = 0.001) -> list[dict]:
        """Drive simulated time at `factor` x wall time up to `to`."""
        if self.clock.mode != ACCELERATED:
            raise ProgramStateError("run_accelerated requires accelerated mode")
        steps: list[dict] = []
        anchor_wall = _wall.monotonic()
        anchor_sim = self.clock.now
        while self.clock.now < to:
            elapsed = _wall.monotonic() - anchor_wall
            target = min(to, anchor_sim + int(elapsed * 1000 * self.clock.factor))
            if target > self.clock.now:
                steps.extend(self._advance_to(target))
            else:
                _wall.sleep(poll_s)
        return steps

    def _advance_to(self, to: int) -> list[dict]:
        steps: list[dict] = []
        while True:
            timer = self.clock.pop_due(to)
            if timer is None:
                break
            steps.append({"at": timer.due, "purpose": timer.purpose, "owner": timer.owner})
            if timer.purpose == "resume":
                pid, rule_index, idx = timer.payload
                self._work.append(("resume", pid, rule_index, idx))
            elif timer.purpose == "tick":
                source, time_text = timer.payload
                self._tick_timers.pop((source, time_text), None)
                desc = self.registry.descriptor(source)
                if desc is not None and desc.availability == AVAILABLE:
                    event = HomeEvent(
                        source=source,
                        event_type=CLOCK_EVENT,
                        payload={"time": time_text},
                        at=self.clock.now,
                    )
                    event = self.registry.ingest_event(event, cause="scenario")
                    self._work.append(("event", event))
            elif timer.purpose == "scenario":
                self._work.append(("scenario", timer.payload))
            self._drain()
            self._sync_tick_timers()
        self.clock.settle(to)
        return steps

    # -- rule machinery ----------------------------------------------------------

    def dispatch(self, event: HomeEvent) -> list[Firing]:
        """Firings an (already applied) event produces, in execution order."""
        candidates: list[tuple[int, int, str, dict]] = []
        for pid, inst in self.instances.items():
            if inst.status == STOPPED:
                continue
            for ridx in sorted(inst.armed):
                rule = inst.program.rules[ridx]
                trig = rule.trigger
                if not isinstance(trig, EventTrigger):
                    continue
                if trig.event_type != event.event_type:
                    continue
                if event.stale:
                    continue
                if event.source not in self._resolve(trig.selector):
                    continue
                if trig.param_value is not None:
                    edef = self._event_def(event.source, event.event_type)
                    if edef is None or edef.trigger_param is None:
                        continue
                    if event.payload.get(edef.trigger_param) != trig.param_value:
                        continue
                candidates.append(
                    (
                        inst.start_order,
                        ridx,
                        pid,
                        {
                            "source": event.source,
                            "event_type": event.event_type,
                            "at": event.at,
                        },
                    )
                )
        candidates.extend(self._edge_candidates())
        candidates.sort(key=lambda c: (c[0], c[1]))
        return [
            Firing(program_id=pid, rule_index=ridx, trigger=info, at=self.clock.now)
            for _, ridx, pid, info in candidates
        ]

    def _event_def(self, source: str, event_type: str):
        desc = self.registry.descriptor(source)
        if desc is None:
            return None
        return self.registry.catalog.kind(desc.kind).events.get(event_type)

    def _edge_candidates(self) -> list[tuple[int, int, str, dict]]:
        """Rising edges of armed state conditions; updates the edge memory."""
        out = []
        for pid, inst in self.instances.items():
            if inst.status == STOPPED:
                continue
            for ridx in sorted(inst.armed):
                rule = inst.program.rules[ridx]
                if not isinstance(rule.trigger, StateTrigger):
                    continue
                value = self._eval_condition(rule.trigger.condition)
                last = inst.state_last.get(ridx, False)
                inst.state_last[ridx] = value
                if value and not last:
                    out.append((inst.start_order, ridx, pid, {"edge": True}))
        return out

    def _resolve(self, selector) -> tuple[str, ...]:
        return self.registry.resolve(selector)

    def _eval_atom(self, atom: Atom) -> bool:
        ids = self._resolve(atom.selector)
        if not ids:
            return False  # pessimistic: unresolved or empty never satisfies
        results = []
        for did in ids:
            desc = self.registry.descriptor(did)
            kind = self.registry.catalog.kind(desc.kind)
            dom = kind.state_vars.get(atom.variable)
            if dom is None or not dom.contains(atom.value):
                return False
            current = self.registry.read_state(did, atom.variable).value
            if atom.comparator in ("=", "!="):
                ok = (current == atom.value) if atom.comparator == "=" else (current != atom.value)
            else:
                if not dom.ordered():
                    return False
                a = domain_sort_key(dom, current)
                b = domain_sort_key(dom, atom.value)
                ok = {
                    "<": a < b,
                    "<=": a <= b,
                    ">": a > b,
                    ">=": a >= b,
                }[atom.comparator]
            results.append(ok)
        return any(results) if atom.quantifier == "any" else all(results)

    def _eval_condition(self, cond) -> bool:
        if isinstance(cond, Atom):
            return self._eval_atom(cond)
        if isinstance(cond, Not):
            return not self._eval_condition(cond.item)
        if isinstance(cond, And):
            return all(self._eval_condition(i) for i in cond.items)
        if isinstance(cond, Or):
            return any(self._eval_condition(i) for i in cond.items)
        raise TypeError(f"not a condition: {cond!r}")

    # -- execution ------------------------------------------------------------------

    def _drain(self) -> None:
        if self._draining:
            return
        self._draining = True
        try:
            while self._work:
                item = self._work.popleft()
                kind = item[0]
                if kind == "event":
                    for firing in self.dispatch(item[1]):
                        self._work.append(("firing", firing.program_id, firing.rule_index, firing.trigger))
                elif kind == "firing":
                    self._execute_firing(item[1], item[2], item[3])
                elif kind == "resume":
                    self._resume(item[1], item[2], item[3])
                elif kind == "scenario":
                    self._scenario_step(item[1])
                else:  # pragma: no cover
                    raise AssertionError(f"unknown work item {item!r}")
        finally:
            self._draining = False

    def _execute_firing(self, program_id: str, rule_index: int, trigger: dict) -> None:
        inst = self.instances.get(program_id)
        if inst is None or inst.status == STOPPED or rule_index not in inst.armed:
            return
        inst.rule_counters[rule_index] = inst.rule_counters.get(rule_index, 0) + 1
        self.trace.record(
            at=self.clock.now,
            category="rule-fired",
            subject=program_id,
            details={"rule": rule_index, "trigger": trigger},
            cause=program_id,
        )
        self._exec_statements(inst, rule_index=rule_index, start_idx=0)
        self._notify_snapshot(program_id)

    def _resume(self, program_id: str, rule_index, idx: int) -> None:
        inst = self.instances.get(program_id)
        if inst is None or inst.status == STOPPED:
            return
        self._exec_statements(inst, rule_index=rule_index, start_idx=idx)

    def _exec_statements(self, inst: _Instance, rule_index, start_idx: int) -> None:
        pid = inst.program.program_id
        if rule_index is None:
            stmts = inst.program.imperative
            base = "imperative"
        else:
            stmts = inst.program.rules[rule_index].body
            base = f"rules[{rule_index}].body"
        for i in range(start_idx, len(stmts)):
            if inst.status == STOPPED:
                return  # stopped itself mid-body; remaining statements skipped
            stmt = stmts[i]
            path = f"{base}[{i}]"
            if isinstance(stmt, WaitStatement):
                due = self.clock.now + stmt.duration_ms
                self.clock.schedule(
                    due, owner=f"prog:{pid}", purpose="resume", payload=(pid, rule_index, i + 1)
                )
                inst.stmt_counters[path] = inst.stmt_counters.get(path, 0) + 1
                self.trace.record(
                    at=self.clock.now,
                    category="program-lifecycle",
                    subject=pid,
                    details={"op": "wait", "statement": path, "resume_at": due},
                    cause=pid,
                )
                return  # suspended; the timer continues at i + 1
            if isinstance(stmt, ActionStatement):
                self._exec_action(inst, stmt, path)
            elif isinstance(stmt, StartStatement):
                self._exec_start(inst, stmt, path)
            elif isinstance(stmt, StopStatement):
                self._exec_stop(inst, stmt, path)
            else:  # pragma: no cover
                raise AssertionError(f"unknown statement {stmt!r}")
        if rule_index is None and inst.status != STOPPED:
            inst.imperative_done = True
            if not inst.program.rules:
                # nothing left to wait for
                self.stop(pid, cause=pid, reason="completed")

    def _exec_action(self, inst: _Instance, stmt: ActionStatement, path: str) -> None:
        pid = inst.program.program_id
        if isinstance(stmt.selector, ById):
            desc = self.registry.descriptor(stmt.selector.device_id)
            if desc is None or desc.availability != AVAILABLE:
                self.trace.record(
                    at=self.clock.now,
                    category="degraded-skip",
                    subject=stmt.selector.device_id,
                    details={
                        "statement": path,
                        "action": stmt.action_name,
                        "reason": "unresolved-device",
                    },
                    cause=pid,
                )
                self._refresh_unknown_refs(inst)
                return
            targets: tuple[str, ...] = (stmt.selector.device_id,)
        else:
            targets = self._resolve(stmt.selector)
        for target in targets:
            try:
                _, events = self.registry.apply_action(
                    target, stmt.action_name, stmt.args_dict, cause=pid, statement=path
                )
            except CriticalDeviceDeniedError:
                continue  # denial already traced; state untouched
            except MissingDeviceError:
                self.trace.record(
                    at=self.clock.now,
                    category="degraded-skip",
                    subject=target,
                    details={"statement": path, "action": stmt.action_name, "reason": "missing"},
                    cause=pid,
                )
                self._refresh_unknown_refs(inst)
                continue
            inst.stmt_counters[path] = inst.stmt_counters.get(path, 0) + 1
            for ev in events:
                self._work.append(("event", ev))

    def _exec_start(self, inst: _Instance, stmt: StartStatement, path: str) -> None:
        pid = inst.program.program_id
        target = stmt.program_id
        inst.stmt_counters[path] = inst.stmt_counters.get(path, 0) + 1
        target_inst = self.instances.get(target)
        if target not in self.programs:
            self.trace.record(
                at=self.clock.now,
                category="program-lifecycle",
                subject=target,
                details={"op": "start-skipped", "statement": path, "reason": "unknown-program"},
                cause=pid,
            )
            return
        if target_inst is not None and target_inst.status != STOPPED:
            self.trace.record(
                at=self.clock.now,
                category="program-lifecycle",
                subject=target,
                details={"op": "start-skipped", "statement": path, "reason": "already-running"},
                cause=pid,
            )
            return
        self.start(target, cause=pid, statement=path)

    def _exec_stop(self, inst: _Instance, stmt: StopStatement, path: str) -> None:
        pid = inst.program.program_id
        target = stmt.program_id
        inst.stmt_counters[path] = inst.stmt_counters.get(path, 0) + 1
        target_inst = self.instances.get(target)
        if target_inst is None or target_inst.status == STOPPED:
            self.trace.record(
                at=self.clock.now,
                category="program-lifecycle",
                subject=target,
                details={"op": "stop-skipped", "statement": path, "reason": "not-running"},
                cause=pid,
            )
            return
        self.stop(target, cause=pid, statement=path)

    # -- reactions to registry churn ----------------------------------------------

    def _refresh_unknown_refs(self, inst: _Instance, trace_transition: bool = True) -> None:
        refs = set()
        for path, selector in selector_paths(inst.program):
            if isinstance(selector, ById):
                desc = self.registry.descriptor(selector.device_id)
                if desc is None or desc.availability != AVAILABLE:
                    refs.add(path)
        inst.unknown_refs = refs
        if inst.status == STOPPED:
            return
        wanted = DEGRADED if refs else RUNNING
        if inst.status != wanted:
            inst.status = wanted
            if trace_transition:
                self.trace.record(
                    at=self.clock.now,
                    category="program-lifecycle",
                    subject=inst.program.program_id,
                    details={"op": "degraded" if refs else "recovered"},
                    cause=inst.program.program_id,
                )
            self._notify_snapshot(inst.program.program_id)
        elif inst.status == DEGRADED:
            self._notify_snapshot(inst.program.program_id)

    def _after_registry_change(self) -> None:
        for pid in sorted(self.instances):
            self._refresh_unknown_refs(self.instances[pid])
        candidates = self._edge_candidates()
        candidates.sort(key=lambda c: (c[0], c[1]))
        for order, ridx, pid, info in candidates:
            self._work.append(("firing", pid, ridx, info))
        self._sync_tick_timers()

    # -- lazy clock ticks -------------------------------------------------------------

    def _armed_tick_times(self) -> set[tuple[str, str]]:
        wanted: set[tuple[str, str]] = set()
        for inst in self.instances.values():
            if inst.status == STOPPED:
                continue
            for ridx in inst.armed:
                trig = inst.program.rules[ridx].trigger
                if not isinstance(trig, EventTrigger) or trig.event_type != CLOCK_EVENT:
                    continue
                if trig.param_value is None:
                    continue
                for source in self._resolve(trig.selector):
                    desc = self.registry.descriptor(source)
                    if desc is not None and desc.kind == CLOCK_KIND:
                        wanted.add((source, str(trig.param_value)))
        return wanted

    def _sync_tick_timers(self) -> None:
        wanted = self._armed_tick_times()
        for key in sorted(set(self._tick_timers) - wanted):
            timer = self._tick_timers.pop(key)
            timer.cancelled = True
        for source, time_text in sorted(wanted - set(self._tick_timers)):
            due = next_occurrence(self.clock.now, time_text)
            self._tick_timers[(source, time_text)] = self.clock.schedule(
                due, owner="clock", purpose="tick", payload=(source, time_text)
            )

    # -- scenario steps (scheduled as timers by the gateway) ----------------------------

    def _scenario_step(self, step: dict) -> None:
        # a physically impossible step (re-registering a present device,
        # emitting from a never-seen one) must not wedge the clock: trace
        # it and keep playing
        try:
            self._scenario_step_inner(step)
        except HearthError as exc:
            self.trace.record(
                at=self.clock.now,
                category="program-lifecycle",
                subject="scenario",
                details={
                    "op": "scenario-error",
                    "step": step.get("op", "?"),
                    "id": step.get("id", ""),
                    "error": exc.code,
                },
                cause="scenario",
            )

    def _scenario_step_inner(self, step: dict) -> None:
        op = step["op"]
        if op == "register":
            desc = DeviceDescriptor(
                id=step["id"],
                kind=step["kind"],
                display_name=step.get("name", step["id"]),
                location=step.get("location", ""),
                properties=step.get("properties", {}),
                critical=bool(step.get("critical", False)),
            )
            self.registry.register_device(desc, step.get("state"))
            self._after_registry_change()
        elif op == "unregister":
            self.registry.unregister_device(step["id"])
            self._after_registry_change()
        elif op == "set_critical":
            self.registry.set_critical(step["id"], bool(step["critical"]))
            self._after_registry_change()
        elif op == "emit":
            event = HomeEvent(
                source=step["id"],
                event_type=step["event"],
                payload=step.get("payload", {}),
                at=self.clock.now,
            )
            event = self.registry.ingest_event(event, cause="scenario")
            self._work.append(("event", event))
        elif op == "marker":
            self.trace.record(
                at=self.clock.now,
                category="program-lifecycle",
                subject="scenario",
                details={"op": "marker", "label": step.get("label", "")},
                cause="scenario",
            )
        else:  # pragma: no cover
            raise AssertionError(f"unknown scenario op {op!r}")

    # -- integrity --------------------------------------------------------------------

    def state_fingerprint(self, exclude_now: bool = False) -> str:
        snap = self.registry.snapshot()
        doc = {
            "registry": {
                "generation": snap.generation,
                "descriptors": [
                    {
                        "id": d.id,
                        "kind": d.kind,
                        "name": d.display_name,
                        "location": d.location,
                        "critical": d.critical,
                        "availability": d.availability,
                    }
                    for d in snap.descriptors
                ],
                "states": {k: dict(sorted(v.items())) for k, v in sorted(snap.states.items())},
            },
            "instances": {
                pid: {
                    "status": inst.status,
                    "stmt": dict(sorted(inst.stmt_counters.items())),
                    "rules": {str(k): v for k, v in sorted(inst.rule_counters.items())},
                    "armed": sorted(inst.armed),
                    "edges": {str(k): v for k, v in sorted(inst.state_last.items())},
                    "unknown": sorted(inst.unknown_refs),
                }
                for pid, inst in sorted(self.instances.items())
            },
            "timers": [
                {"due": t.due, "seq": t.seq, "owner": t.owner, "purpose": t.purpose}
                for t in self.clock.pending()
            ],
            "trace_len": len(self.trace.entries),
        }
        if not exclude_now:
            doc["now"] = self.clock.now
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()
