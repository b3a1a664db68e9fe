"""Kind catalog: the device vocabulary the whole system is specialized to.

A kind declares state variables (each with a value domain), the events the
device can emit, and the actions it accepts.  The catalog is loaded from a
YAML file; `DEFAULT_CATALOG_PATH` ships a household of common kinds.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Union

import yaml

from .errors import CatalogError

Value = Union[bool, int, str]

# Integer ranges up to this many members are offered as concrete tokens by
# the completion engine; wider ones become free-entry number tokens.
ENUMERABLE_SPAN = 16

_TIME_RE = re.compile(r"^(\d{1,2}):(\d{2})$")


def parse_time_of_day(text: str) -> Optional[str]:
    """Normalize an HH:MM string to canonical zero-padded form, or None."""
    m = _TIME_RE.match(text)
    if not m:
        return None
    hh, mm = int(m.group(1)), int(m.group(2))
    if hh > 23 or mm > 59:
        return None
    return f"{hh:02d}:{mm:02d}"


def time_of_day_minutes(value: str) -> int:
    hh, mm = value.split(":")
    return int(hh) * 60 + int(mm)


@dataclass(frozen=True)
class BoolDomain:
    kind = "boolean"

    def contains(self, value: Value) -> bool:
        return isinstance(value, bool)

    def parse_text(self, text: str) -> Optional[Value]:
        return {"true": True, "false": False}.get(text)

    def display(self, value: Value) -> str:
        return "true" if value else "false"

    def option_values(self) -> Optional[tuple]:
        return (True, False)

    def ordered(self) -> bool:
        return False

    def representative(self) -> Value:
        return True


@dataclass(frozen=True)
class IntRangeDomain:
    lo: int
    hi: int
    kind = "integer"

    def contains(self, value: Value) -> bool:
        return isinstance(value, int) and not isinstance(value, bool) and self.lo <= value <= self.hi

    def parse_text(self, text: str) -> Optional[Value]:
        if not re.fullmatch(r"-?\d+", text):
            return None
        v = int(text)
        return v if self.contains(v) else None

    def display(self, value: Value) -> str:
        return str(value)

    def option_values(self) -> Optional[tuple]:
        if self.hi - self.lo + 1 <= ENUMERABLE_SPAN:
            return tuple(range(self.lo, self.hi + 1))
        return None

    def ordered(self) -> bool:
        return True

    def representative(self) -> Value:
        return self.lo


@dataclass(frozen=True)
class PercentDomain(IntRangeDomain):
    lo: int = 0
    hi: int = 100
    kind = "percent"


@dataclass(frozen=True)
class EnumDomain:
    members: tuple[str, ...]
    kind = "enum"

    def contains(self, value: Value) -> bool:
        return isinstance(value, str) and value in self.members

    def parse_text(self, text: str) -> Optional[Value]:
        return text if text in self.members else None

    def display(self, value: Value) -> str:
        return str(value)

    def option_values(self) -> Optional[tuple]:
        return self.members

    def ordered(self) -> bool:
        return False

    def representative(self) -> Value:
        return self.members[0]


@dataclass(frozen=True)
class TimeOfDayDomain:
    kind = "time-of-day"

    def contains(self, value: Value) -> bool:
        return isinstance(value, str) and parse_time_of_day(value) == value

    def parse_text(self, text: str) -> Optional[Value]:
        return parse_time_of_day(text)

    def display(self, value: Value) -> str:
        return str(value)

    def option_values(self) -> Optional[tuple]:
        return None

    def ordered(self) -> bool:
        return True

    def representative(self) -> Value:
        return "12:00"


Domain = Union[BoolDomain, IntRangeDomain, PercentDomain, EnumDomain, TimeOfDayDomain]


def domain_sort_key(domain: Domain, value: Value):
    """Key usable with the order comparators; only for ordered domains."""
    if isinstance(domain, TimeOfDayDomain):
        return time_of_day_minutes(value)
    return value


# Effect/`sets` entries may reference the action parameter or an event
# payload field instead of a literal.
PARAM_REF = "$param"


@dataclass(frozen=True)
class PayloadRef:
    field: str


@dataclass(frozen=True)
class ActionDef:
    name: str
    display: str
    param: Optional[tuple[str, Domain]] = None  # (param name, domain)
    effect: Mapping[str, object] = field(default_factory=dict)  # var -> literal | PARAM_REF
    emits: Optional[str] = None  # event type emitted on success
    power_removing: bool = False


@dataclass(frozen=True)
class EventDef:
    name: str
    display: str
    fields: Mapping[str, Domain] = field(default_factory=dict)
    trigger_param: Optional[str] = None  # payload field usable as a trigger literal
    sets: Mapping[str, object] = field(default_factory=dict)  # var -> literal | PayloadRef


@dataclass(frozen=True)
class KindDef:
    name: str
    state_vars: Mapping[str, Domain]
    actions: Mapping[str, ActionDef]
    events: Mapping[str, EventDef]


class Catalog:
    """Validated, immutable set of kind definitions."""

    def __init__(self, kinds: Mapping[str, KindDef]):
        self.kinds: dict[str, KindDef] = dict(kinds)
        self._check()

    def __contains__(self, kind_name: str) -> bool:
        return kind_name in self.kinds

    def kind(self, kind_name: str) -> KindDef:
        return self.kinds[kind_name]

    def _check(self) -> None:
        action_display: dict[str, str] = {}
        action_param: dict[str, Optional[tuple[str, Domain]]] = {}
        event_display: dict[str, str] = {}
        for kind in self.kinds.values():
            for act in kind.actions.values():
                for var, val in act.effect.items():
                    if var not in kind.state_vars:
                        raise CatalogError(
                            f"kind {kind.name!r}: action {act.name!r} writes undeclared variable {var!r}"
                        )
                    dom = kind.state_vars[var]
                    if val == PARAM_REF:
                        if act.param is None:
                            raise CatalogError(
                                f"kind {kind.name!r}: action {act.name!r} uses {PARAM_REF} with no parameter"
                            )
                    elif not dom.contains(val):
                        raise CatalogError(
                            f"kind {kind.name!r}: action {act.name!r} effect value {val!r} outside domain of {var!r}"
                        )
                if act.emits is not None and act.emits not in kind.events:
                    raise CatalogError(
                        f"kind {kind.name!r}: action {act.name!r} emits undeclared event {act.emits!r}"
                    )
                if act.effect and act.emits is None:
                    # state rules are re-evaluated on events; silent state
                    # changes would make edges undetectable
                    raise CatalogError(
                        f"kind {kind.name!r}: action {act.name!r} changes state but emits no event"
                    )
                # Token grammar requires the mapping text<->name<->parameter
                # shape to be consistent across kinds.
                if action_display.setdefault(act.name, act.display) != act.display:
                    raise CatalogError(f"action name {act.name!r} has two display texts")
                prev = action_param.setdefault(act.name, act.param)
                if prev != act.param:
                    raise CatalogError(f"action {act.name!r} has inconsistent parameters across kinds")
            for ev in kind.events.values():
                if ev.trigger_param is not None and ev.trigger_param not in ev.fields:
                    raise CatalogError(
                        f"kind {kind.name!r}: event {ev.name!r} trigger param {ev.trigger_param!r} not in payload"
                    )
                for var, val in ev.sets.items():
                    if var not in kind.state_vars:
                        raise CatalogError(
                            f"kind {kind.name!r}: event {ev.name!r} sets undeclared variable {var!r}"
                        )
                    dom = kind.state_vars[var]
                    if isinstance(val, PayloadRef):
                        if val.field not in ev.fields:
                            raise CatalogError(
                                f"kind {kind.name!r}: event {ev.name!r} sets from unknown field {val.field!r}"
                            )
                    elif not dom.contains(val):
                        raise CatalogError(
                            f"kind {kind.name!r}: event {ev.name!r} sets {var!r} to out-of-domain {val!r}"
                        )
                if event_display.setdefault(ev.name, ev.display) != ev.display:
                    raise CatalogError(f"event name {ev.name!r} has two display texts")

    def validate_state(self, kind_name: str, values: Mapping[str, Value]) -> None:
        """Require a complete, in-domain assignment for the kind's variables."""
        kind = self.kinds[kind_name]
        for var, dom in kind.state_vars.items():
            if var not in values:
                raise CatalogError(f"missing initial value for {kind_name}.{var}")
            if not dom.contains(values[var]):
                raise CatalogError(f"value {values[var]!r} outside domain of {kind_name}.{var}")
        for var in values:
            if var not in kind.state_vars:
                raise CatalogError(f"unknown variable {kind_name}.{var}")


def _parse_domain(spec, kind_vars: Mapping[str, Domain], where: str) -> Domain:
    if isinstance(spec, str):
        # reference to a declared variable's domain
        if spec not in kind_vars:
            raise CatalogError(f"{where}: domain reference {spec!r} is not a declared variable")
        return kind_vars[spec]
    if not isinstance(spec, dict) or "type" not in spec:
        raise CatalogError(f"{where}: malformed domain {spec!r}")
    t = spec["type"]
    if t == "boolean":
        return BoolDomain()
    if t == "integer":
        return IntRangeDomain(lo=int(spec["lo"]), hi=int(spec["hi"]))
    if t == "percent":
        return PercentDomain()
    if t == "enum":
        members = spec.get("members")
        if not members or not all(isinstance(m, str) for m in members):
            raise CatalogError(f"{where}: enum needs a list of string members (quote on/off in YAML)")
        if any(m in ("true", "false") for m in members):
            raise CatalogError(f"{where}: enum members may not shadow boolean literals")
        return EnumDomain(members=tuple(members))
    if t == "time-of-day":
        return TimeOfDayDomain()
    raise CatalogError(f"{where}: unknown domain type {t!r}")


def _parse_kind(name: str, spec: dict) -> KindDef:
    state_vars: dict[str, Domain] = {}
    for var, dspec in (spec.get("vars") or {}).items():
        state_vars[var] = _parse_domain(dspec, {}, f"kind {name}, var {var}")
    actions: dict[str, ActionDef] = {}
    for aname, aspec in (spec.get("actions") or {}).items():
        aspec = aspec or {}
        param = None
        if "param" in aspec:
            pspec = aspec["param"]
            param = (pspec["name"], _parse_domain(pspec["domain"], state_vars, f"action {aname}"))
        effect = {}
        for var, val in (aspec.get("effect") or {}).items():
            effect[var] = val
        actions[aname] = ActionDef(
            name=aname,
            display=aspec.get("display", aname.replace("-", " ")),
            param=param,
            effect=effect,
            emits=aspec.get("emits"),
            power_removing=bool(aspec.get("power_removing", False)),
        )
    events: dict[str, EventDef] = {}
    for ename, espec in (spec.get("events") or {}).items():
        espec = espec or {}
        fields = {
            fname: _parse_domain(fspec, state_vars, f"event {ename}, field {fname}")
            for fname, fspec in (espec.get("fields") or {}).items()
        }
        sets: dict[str, object] = {}
        for var, sval in (espec.get("sets") or {}).items():
            if isinstance(sval, dict) and "payload" in sval:
                sets[var] = PayloadRef(field=sval["payload"])
            else:
                sets[var] = sval
        events[ename] = EventDef(
            name=ename,
            display=espec.get("display", ename.replace("-", " ")),
            fields=fields,
            trigger_param=espec.get("trigger_param"),
            sets=sets,
        )
    return KindDef(name=name, state_vars=state_vars, actions=actions, events=events)


def load_catalog(path: Union[str, Path]) -> Catalog:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise CatalogError(f"unparseable catalog {path}: {exc}") from exc
    except OSError as exc:
        raise CatalogError(f"unreadable catalog {path}: {exc}") from exc
    if not isinstance(doc, dict) or "kinds" not in doc:
        raise CatalogError(f"catalog {path} must be a mapping with a 'kinds' section")
    kinds = {}
    for name, spec in doc["kinds"].items():
        if not isinstance(spec, dict):
            raise CatalogError(f"kind {name!r} must be a mapping")
        kinds[name] = _parse_kind(name, spec)
    return Catalog(kinds)


def default_catalog_path() -> Path:
    return Path(str(resources.files("hearth").joinpath("data/default_catalog.yaml")))


def default_catalog() -> Catalog:
    return load_catalog(default_catalog_path())
