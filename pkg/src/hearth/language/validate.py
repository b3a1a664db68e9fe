"""Static checks of a program against the current home.

Unknown references are reported, never raised: a program whose lamp
vanished stays loadable and runnable (degraded).  Type errors cover
hand-built ASTs too, which the grammar alone cannot police.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..registry import AVAILABLE, RegistrySnapshot, resolve_selector
from .nodes import (
    ORDER_COMPARATORS,
    ActionStatement,
    ById,
    EventTrigger,
    Filtered,
    Program,
    StartStatement,
    StateTrigger,
    StopStatement,
    condition_atoms,
    selector_paths,
    statement_paths,
)


@dataclass
class ValidationReport:
    bindings: dict[str, tuple[str, ...]] = field(default_factory=dict)
    unknown_refs: list[tuple[str, str]] = field(default_factory=list)  # (path, device id)
    type_errors: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)  # structural problems

    @property
    def ok(self) -> bool:
        return not self.type_errors and not self.errors

    @property
    def activatable(self) -> bool:
        """Unknown refs allow activation (degraded); errors do not."""
        return self.ok


def _selector_kind(selector, snapshot: RegistrySnapshot) -> Optional[str]:
    if isinstance(selector, ById):
        desc = snapshot.device(selector.device_id)
        return desc.kind if desc is not None else None
    return selector.kind


def validate(
    program: Program,
    snapshot: RegistrySnapshot,
    known_programs: Sequence[str] = (),
) -> ValidationReport:
    report = ValidationReport()
    catalog = snapshot.catalog

    if not program.imperative and not program.rules:
        report.errors.append("program has neither imperative statements nor rules")

    for path, selector in selector_paths(program):
        if isinstance(selector, ById):
            desc = snapshot.device(selector.device_id)
            if desc is None or desc.availability != AVAILABLE:
                report.unknown_refs.append((path, selector.device_id))
                report.bindings[path] = ()
            else:
                report.bindings[path] = (selector.device_id,)
            continue
        if selector.kind not in catalog:
            report.type_errors.append(f"{path}: unknown kind {selector.kind!r}")
            report.bindings[path] = ()
            continue
        if isinstance(selector, Filtered) and selector.property_name != "location":
            report.type_errors.append(
                f"{path}: only location filtering is supported, not {selector.property_name!r}"
            )
        report.bindings[path] = resolve_selector(selector, snapshot)

    def check_value(domain, value, where: str) -> None:
        if not domain.contains(value):
            report.type_errors.append(f"{where}: literal {value!r} outside domain")

    for path, stmt in statement_paths(program):
        if isinstance(stmt, ActionStatement):
            kind_name = _selector_kind(stmt.selector, snapshot)
            if kind_name is None or kind_name not in catalog:
                continue  # unknown ref already reported
            kind = catalog.kind(kind_name)
            action = kind.actions.get(stmt.action_name)
            if action is None:
                report.type_errors.append(
                    f"{path}: {kind_name} does not support action {stmt.action_name!r}"
                )
                continue
            args = dict(stmt.args)
            if action.param is None:
                if args:
                    report.type_errors.append(f"{path}: action takes no arguments")
            else:
                pname, pdom = action.param
                if set(args) != {pname}:
                    report.type_errors.append(f"{path}: action needs exactly arg {pname!r}")
                else:
                    check_value(pdom, args[pname], path)
        elif isinstance(stmt, (StartStatement, StopStatement)):
            target = stmt.program_id
            if isinstance(stmt, StartStatement) and target == program.program_id:
                report.errors.append(f"{path}: a program may not start itself")
            elif target != program.program_id and known_programs and target not in known_programs:
                report.errors.append(f"{path}: unknown program {target!r}")

    for rule in program.rules:
        rpath = f"rules[{rule.index}].trigger"
        trig = rule.trigger
        if isinstance(trig, EventTrigger):
            kind_name = _selector_kind(trig.selector, snapshot)
            if kind_name is None or kind_name not in catalog:
                continue
            kind = catalog.kind(kind_name)
            edef = kind.events.get(trig.event_type)
            if edef is None:
                report.type_errors.append(
                    f"{rpath}: {kind_name} has no event {trig.event_type!r}"
                )
                continue
            if trig.param_value is not None:
                if edef.trigger_param is None:
                    report.type_errors.append(
                        f"{rpath}: event {trig.event_type!r} takes no trigger literal"
                    )
                else:
                    check_value(edef.fields[edef.trigger_param], trig.param_value, rpath)
        else:
            assert isinstance(trig, StateTrigger)
            for i, atom in enumerate(condition_atoms(trig.condition)):
                apath = f"{rpath}.atom[{i}]"
                kind_name = _selector_kind(atom.selector, snapshot)
                if kind_name is None or kind_name not in catalog:
                    continue
                kind = catalog.kind(kind_name)
                dom = kind.state_vars.get(atom.variable)
                if dom is None:
                    report.type_errors.append(
                        f"{apath}: {kind_name} has no variable {atom.variable!r}"
                    )
                    continue
                if atom.comparator in ORDER_COMPARATORS and not dom.ordered():
                    report.type_errors.append(
                        f"{apath}: comparator {atom.comparator!r} needs an ordered domain"
                    )
                check_value(dom, atom.value, apath)
                if isinstance(atom.selector, ById) and atom.quantifier != "all":
                    report.type_errors.append(
                        f"{apath}: quantifier applies only to plural selectors"
                    )
    return report
