"""AST for automation programs: an imperative prologue plus trigger rules.

All nodes are immutable values.  JSON codecs live here too because the
program store persists both the source text and the structured tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

# -- selectors ---------------------------------------------------------------


@dataclass(frozen=True)
class ById:
    device_id: str


@dataclass(frozen=True)
class AllOfKind:
    kind: str


@dataclass(frozen=True)
class Filtered:
    kind: str
    property_name: str
    property_value: str


Selector = Union[ById, AllOfKind, Filtered]


# -- statements ---------------------------------------------------------------


@dataclass(frozen=True)
class ActionStatement:
    selector: Selector
    action_name: str
    args: tuple[tuple[str, object], ...] = ()  # ((param, value),); at most one

    @property
    def args_dict(self) -> dict:
        return dict(self.args)


@dataclass(frozen=True)
class StartStatement:
    program_id: str


@dataclass(frozen=True)
class StopStatement:
    program_id: str


@dataclass(frozen=True)
class WaitStatement:
    duration_ms: int


Statement = Union[ActionStatement, StartStatement, StopStatement, WaitStatement]


# -- conditions ----------------------------------------------------------------

ALL = "all"
ANY = "any"

COMPARATORS = ("=", "!=", "<", "<=", ">", ">=")
ORDER_COMPARATORS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class Atom:
    selector: Selector
    variable: str
    comparator: str  # one of COMPARATORS
    value: object
    quantifier: str = ALL  # meaningful only for plural selectors


@dataclass(frozen=True)
class And:
    items: tuple  # of Condition


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class Not:
    item: object


Condition = Union[Atom, And, Or, Not]


# -- rules and programs --------------------------------------------------------


@dataclass(frozen=True)
class EventTrigger:
    selector: Selector
    event_type: str
    param_value: Optional[object] = None  # literal for the event's trigger param


@dataclass(frozen=True)
class StateTrigger:
    condition: Condition


Trigger = Union[EventTrigger, StateTrigger]


@dataclass(frozen=True)
class Rule:
    index: int
    trigger: Trigger
    body: tuple[Statement, ...]


@dataclass(frozen=True)
class Program:
    program_id: str
    name: str
    imperative: tuple[Statement, ...] = ()
    rules: tuple[Rule, ...] = ()


# -- path helpers ----------------------------------------------------------------


def statement_paths(program: Program) -> list[tuple[str, Statement]]:
    """Stable path string for every statement, used by counters and traces."""
    out = [(f"imperative[{i}]", s) for i, s in enumerate(program.imperative)]
    for rule in program.rules:
        out.extend(
            (f"rules[{rule.index}].body[{i}]", s) for i, s in enumerate(rule.body)
        )
    return out


def _condition_selectors(cond: Condition, prefix: str) -> list[tuple[str, Selector]]:
    if isinstance(cond, Atom):
        return [(f"{prefix}.selector", cond.selector)]
    if isinstance(cond, Not):
        return _condition_selectors(cond.item, f"{prefix}.not")
    out = []
    for i, item in enumerate(cond.items):
        out.extend(_condition_selectors(item, f"{prefix}[{i}]"))
    return out


def selector_paths(program: Program) -> list[tuple[str, Selector]]:
    """Every selector occurrence with a stable path string."""
    out: list[tuple[str, Selector]] = []
    for path, stmt in statement_paths(program):
        if isinstance(stmt, ActionStatement):
            out.append((f"{path}.selector", stmt.selector))
    for rule in program.rules:
        trig = rule.trigger
        if isinstance(trig, EventTrigger):
            out.append((f"rules[{rule.index}].trigger.selector", trig.selector))
        else:
            out.extend(
                _condition_selectors(trig.condition, f"rules[{rule.index}].trigger.condition")
            )
    return out


def condition_atoms(cond: Condition) -> list[Atom]:
    if isinstance(cond, Atom):
        return [cond]
    if isinstance(cond, Not):
        return condition_atoms(cond.item)
    out = []
    for item in cond.items:
        out.extend(condition_atoms(item))
    return out


# -- JSON codec -------------------------------------------------------------------


def _selector_to_json(sel: Selector) -> dict:
    if isinstance(sel, ById):
        return {"by_id": sel.device_id}
    if isinstance(sel, AllOfKind):
        return {"kind": sel.kind}
    return {"kind": sel.kind, "property": sel.property_name, "value": sel.property_value}


def _selector_from_json(d: dict) -> Selector:
    if "by_id" in d:
        return ById(device_id=d["by_id"])
    if "property" in d:
        return Filtered(kind=d["kind"], property_name=d["property"], property_value=d["value"])
    return AllOfKind(kind=d["kind"])


def _statement_to_json(s: Statement) -> dict:
    if isinstance(s, ActionStatement):
        return {
            "do": s.action_name,
            "on": _selector_to_json(s.selector),
            "args": {k: v for k, v in s.args},
        }
    if isinstance(s, StartStatement):
        return {"start": s.program_id}
    if isinstance(s, StopStatement):
        return {"stop": s.program_id}
    return {"wait_ms": s.duration_ms}


def _statement_from_json(d: dict) -> Statement:
    if "do" in d:
        return ActionStatement(
            selector=_selector_from_json(d["on"]),
            action_name=d["do"],
            args=tuple(sorted(d.get("args", {}).items())),
        )
    if "start" in d:
        return StartStatement(program_id=d["start"])
    if "stop" in d:
        return StopStatement(program_id=d["stop"])
    return WaitStatement(duration_ms=d["wait_ms"])


def _condition_to_json(c: Condition) -> dict:
    if isinstance(c, Atom):
        return {
            "atom": {
                "selector": _selector_to_json(c.selector),
                "variable": c.variable,
                "comparator": c.comparator,
                "value": c.value,
                "quantifier": c.quantifier,
            }
        }
    if isinstance(c, Not):
        return {"not": _condition_to_json(c.item)}
    key = "and" if isinstance(c, And) else "or"
    return {key: [_condition_to_json(i) for i in c.items]}


def _condition_from_json(d: dict) -> Condition:
    if "atom" in d:
        a = d["atom"]
        return Atom(
            selector=_selector_from_json(a["selector"]),
            variable=a["variable"],
            comparator=a["comparator"],
            value=a["value"],
            quantifier=a.get("quantifier", ALL),
        )
    if "not" in d:
        return Not(item=_condition_from_json(d["not"]))
    if "and" in d:
        return And(items=tuple(_condition_from_json(i) for i in d["and"]))
    return Or(items=tuple(_condition_from_json(i) for i in d["or"]))


def program_to_json(p: Program) -> dict:
    rules = []
    for r in p.rules:
        trig = r.trigger
        if isinstance(trig, EventTrigger):
            tj = {
                "event": trig.event_type,
                "selector": _selector_to_json(trig.selector),
            }
            if trig.param_value is not None:
                tj["param"] = trig.param_value
        else:
            tj = {"condition": _condition_to_json(trig.condition)}
        rules.append({"trigger": tj, "body": [_statement_to_json(s) for s in r.body]})
    return {
        "program_id": p.program_id,
        "name": p.name,
        "imperative": [_statement_to_json(s) for s in p.imperative],
        "rules": rules,
    }


def program_from_json(d: dict) -> Program:
    rules = []
    for i, rj in enumerate(d.get("rules", [])):
        tj = rj["trigger"]
        if "event" in tj:
            trig: Trigger = EventTrigger(
                selector=_selector_from_json(tj["selector"]),
                event_type=tj["event"],
                param_value=tj.get("param"),
            )
        else:
            trig = StateTrigger(condition=_condition_from_json(tj["condition"]))
        rules.append(
            Rule(index=i, trigger=trig, body=tuple(_statement_from_json(s) for s in rj["body"]))
        )
    return Program(
        program_id=d["program_id"],
        name=d["name"],
        imperative=tuple(_statement_from_json(s) for s in d.get("imperative", [])),
        rules=tuple(rules),
    )
