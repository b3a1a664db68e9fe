"""Live device registry: descriptors, per-device state, action application.

Devices come and go at runtime.  A departed device is flagged Missing and
retained forever with its last state frozen, so programs that reference it
can still be displayed, validated, and run in degraded mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional

from .catalog import PARAM_REF, Catalog, PayloadRef, Value
from .errors import (
    CatalogError,
    CriticalDeviceDeniedError,
    DomainViolationError,
    DuplicateDeviceError,
    EventSchemaError,
    MissingDeviceError,
    UnknownDeviceError,
    UnknownKindError,
    UnknownVariableError,
    UnsupportedActionError,
)
from .trace import TraceLog

AVAILABLE = "available"
MISSING = "missing"


@dataclass(frozen=True)
class DeviceDescriptor:
    id: str
    kind: str
    display_name: str
    location: str = ""
    properties: Mapping[str, str] = field(default_factory=dict)
    critical: bool = False
    availability: str = AVAILABLE

    def property_value(self, name: str) -> Optional[str]:
        if name == "location":
            return self.location
        return self.properties.get(name)


@dataclass(frozen=True)
class HomeEvent:
    source: str
    event_type: str
    payload: Mapping[str, Value]
    at: int
    stale: bool = False  # emitted while the source was Missing


@dataclass(frozen=True)
class StateReading:
    value: Value
    stale: bool
    updated_at: int


@dataclass(frozen=True)
class RegistryDelta:
    generation: int
    change: str  # registered | unregistered | critical-changed | noop
    device_id: str


@dataclass(frozen=True)
class RegistrySnapshot:
    """Immutable view; safe to share across threads."""

    generation: int
    descriptors: tuple[DeviceDescriptor, ...]
    states: Mapping[str, Mapping[str, Value]]
    catalog: Catalog

    def device(self, device_id: str) -> Optional[DeviceDescriptor]:
        return self._by_id.get(device_id)

    @property
    def _by_id(self) -> Mapping[str, DeviceDescriptor]:
        by_id = getattr(self, "_by_id_cache", None)
        if by_id is None:
            by_id = {d.id: d for d in self.descriptors}
            object.__setattr__(self, "_by_id_cache", by_id)
        return by_id

    def available(self) -> tuple[DeviceDescriptor, ...]:
        return tuple(d for d in self.descriptors if d.availability == AVAILABLE)

    def value(self, device_id: str, variable: str) -> Value:
        return self.states[device_id][variable]


def resolve_selector(selector, snapshot: RegistrySnapshot) -> tuple[str, ...]:
    """Expand a selector to Available device ids, sorted for determinism.

    ById selectors resolve to an empty tuple when the device is Missing or
    was never seen; kind and property selectors bind to whatever currently
    matches (possibly nothing).
    """
    from .language.nodes import AllOfKind, ById, Filtered  # local: avoid cycle

    if isinstance(selector, ById):
        d = snapshot.device(selector.device_id)
        return (d.id,) if d is not None and d.availability == AVAILABLE else ()
    if isinstance(selector, AllOfKind):
        return tuple(sorted(d.id for d in snapshot.available() if d.kind == selector.kind))
    if isinstance(selector, Filtered):
        return tuple(
            sorted(
                d.id
                for d in snapshot.available()
                if d.kind == selector.kind
                and d.property_value(selector.property_name) == selector.property_value
            )
        )
    raise TypeError(f"not a selector: {selector!r}")


class Registry:
    """Mutable registry; must only be mutated from the interpreter thread."""

    def __init__(
        self,
        catalog: Catalog,
        clock: Callable[[], int] = lambda: 0,
        trace: Optional[TraceLog] = None,
        notify: Optional[Callable[[RegistryDelta], None]] = None,
    ):
        self.catalog = catalog
        self._clock = clock
        self._trace = trace
        self._notify = notify
        self.generation = 0
        self._descriptors: dict[str, DeviceDescriptor] = {}
        self._values: dict[str, dict[str, Value]] = {}
        self._updated_at: dict[str, dict[str, int]] = {}

    # -- queries ------------------------------------------------------------

    def descriptor(self, device_id: str) -> Optional[DeviceDescriptor]:
        return self._descriptors.get(device_id)

    def snapshot(self) -> RegistrySnapshot:
        return RegistrySnapshot(
            generation=self.generation,
            descriptors=tuple(self._descriptors[k] for k in sorted(self._descriptors)),
            states={k: dict(v) for k, v in self._values.items()},
            catalog=self.catalog,
        )

    def read_state(self, device_id: str, variable: str) -> StateReading:
        desc = self._descriptors.get(device_id)
        if desc is None:
            raise UnknownDeviceError(f"unknown device {device_id!r}")
        if variable not in self.catalog.kind(desc.kind).state_vars:
            raise UnknownVariableError(f"{desc.kind} has no variable {variable!r}")
        return StateReading(
            value=self._values[device_id][variable],
            stale=desc.availability == MISSING,
            updated_at=self._updated_at[device_id].get(variable, 0),
        )

    # -- mutations ----------------------------------------------------------

    def _bump(
        self, change: str, device_id: str, cause: str = "scenario", extra: Optional[dict] = None
    ) -> RegistryDelta:
        self.generation += 1
        delta = RegistryDelta(generation=self.generation, change=change, device_id=device_id)
        if self._trace is not None:
            details = {"change": change, "generation": self.generation}
            if extra:
                details.update(extra)
            self._trace.record(
                at=self._clock(),
                category="registry-change",
                subject=device_id,
                details=details,
                cause=cause,
            )
        if self._notify is not None:
            self._notify(delta)
        return delta

    def register_device(
        self,
        descriptor: DeviceDescriptor,
        initial_state: Optional[Mapping[str, Value]] = None,
        cause: str = "scenario",
    ) -> RegistryDelta:
        if descriptor.kind not in self.catalog:
            raise UnknownKindError(f"unknown kind {descriptor.kind!r}")
        existing = self._descriptors.get(descriptor.id)
        if existing is not None:
            if existing.availability == AVAILABLE:
                raise DuplicateDeviceError(f"device {descriptor.id!r} already registered")
            if existing.kind != descriptor.kind:
                raise DuplicateDeviceError(
                    f"id {descriptor.id!r} was a {existing.kind}, cannot re-register as {descriptor.kind}"
                )
            # a re-registered id resumes its prior identity and frozen state
            self._descriptors[descriptor.id] = replace(existing, availability=AVAILABLE)
            return self._bump(
                "registered",
                descriptor.id,
                cause,
                extra={"kind": existing.kind, "state": dict(self._values[descriptor.id])},
            )
        try:
            self.catalog.validate_state(descriptor.kind, initial_state or {})
        except CatalogError as exc:
            raise DomainViolationError(str(exc)) from exc
        self._descriptors[descriptor.id] = replace(descriptor, availability=AVAILABLE)
        self._values[descriptor.id] = dict(initial_state or {})
        self._updated_at[descriptor.id] = {v: self._clock() for v in (initial_state or {})}
        return self._bump(
            "registered",
            descriptor.id,
            cause,
            extra={"kind": descriptor.kind, "state": dict(initial_state or {})},
        )

    def unregister_device(self, device_id: str, cause: str = "scenario") -> RegistryDelta:
        desc = self._descriptors.get(device_id)
        if desc is None:
            raise UnknownDeviceError(f"unknown device {device_id!r}")
        if desc.availability == MISSING:
            return RegistryDelta(generation=self.generation, change="noop", device_id=device_id)
        self._descriptors[device_id] = replace(desc, availability=MISSING)
        return self._bump("unregistered", device_id, cause)

    def set_critical(self, device_id: str, critical: bool, cause: str = "scenario") -> RegistryDelta:
        desc = self._descriptors.get(device_id)
        if desc is None:
            raise UnknownDeviceError(f"unknown device {device_id!r}")
        if desc.critical == critical:
            return RegistryDelta(generation=self.generation, change="noop", device_id=device_id)
        self._descriptors[device_id] = replace(desc, critical=critical)
        return self._bump("critical-changed", device_id, cause)

    def resolve(self, selector) -> tuple[str, ...]:
        """Selector expansion against live data; Available devices only."""
        from .language.nodes import ById  # local: avoid cycle

        if isinstance(selector, ById):
            desc = self._descriptors.get(selector.device_id)
            if desc is not None and desc.availability == AVAILABLE:
                return (selector.device_id,)
            return ()
        matches = []
        for did in sorted(self._descriptors):
            desc = self._descriptors[did]
            if desc.availability != AVAILABLE or desc.kind != selector.kind:
                continue
            prop = getattr(selector, "property_name", None)
            if prop is not None and desc.property_value(prop) != selector.property_value:
                continue
            matches.append(did)
        return tuple(matches)

    def apply_action(
        self,
        device_id: str,
        action_name: str,
        args: Optional[Mapping[str, Value]],
        cause: str,
        statement: Optional[str] = None,
    ) -> tuple[dict[str, Value], list[HomeEvent]]:
        """Run an action; returns (state delta, emitted events).

        Emitted events describe effects already applied here: the caller
        dispatches them to rules but must not re-apply their `sets`.
        """
        desc = self._descriptors.get(device_id)
        if desc is None:
            raise UnknownDeviceError(f"unknown device {device_id!r}")
        if desc.availability == MISSING:
            raise MissingDeviceError(f"device {device_id!r} is missing")
        kind = self.catalog.kind(desc.kind)
        action = kind.actions.get(action_name)
        if action is None:
            raise UnsupportedActionError(f"{desc.kind} does not support {action_name!r}")
        args = dict(args or {})
        arg_value: Optional[Value] = None
        if action.param is not None:
            pname, pdom = action.param
            if set(args) != {pname}:
                raise DomainViolationError(f"action {action_name!r} takes exactly one arg {pname!r}")
            arg_value = args[pname]
            if not pdom.contains(arg_value):
                raise DomainViolationError(f"{arg_value!r} outside domain of {action_name}.{pname}")
        elif args:
            raise DomainViolationError(f"action {action_name!r} takes no arguments")
        if desc.critical and action.power_removing:
            if self._trace is not None:
                details = {"action": action_name, "reason": "critical-device"}
                if statement is not None:
                    details["statement"] = statement
                self._trace.record(
                    at=self._clock(),
                    category="denial",
                    subject=device_id,
                    details=details,
                    cause=cause,
                )
            raise CriticalDeviceDeniedError(
                f"{action_name!r} denied on critical device {device_id!r}"
            )

        now = self._clock()
        values = self._values[device_id]
        delta: dict[str, Value] = {}
        for var, spec in action.effect.items():
            new = arg_value if spec == PARAM_REF else spec
            if not kind.state_vars[var].contains(new):
                raise DomainViolationError(f"effect puts {new!r} outside domain of {var}")
            if values.get(var) != new:
                delta[var] = new
        if self._trace is not None:
            details: dict = {"action": action_name, "args": args}
            if statement is not None:
                details["statement"] = statement
            self._trace.record(
                at=now,
                category="action",
                subject=device_id,
                details=details,
                cause=cause,
            )
        for var, new in delta.items():
            values[var] = new
            self._updated_at[device_id][var] = now
        if delta and self._trace is not None:
            self._trace.record(
                at=now,
                category="state-change",
                subject=device_id,
                details={"changes": delta},
                cause=cause,
            )
        events: list[HomeEvent] = []
        if action.emits is not None:
            ev = kind.events[action.emits]
            payload: dict[str, Value] = {}
            if action.param is not None and action.param[0] in ev.fields:
                payload[action.param[0]] = arg_value
            events.append(HomeEvent(source=device_id, event_type=ev.name, payload=payload, at=now))
            if self._trace is not None:
                self._trace.record(
                    at=now,
                    category="device-event",
                    subject=device_id,
                    details={"event": ev.name, "payload": payload},
                    cause=cause,
                )
        return delta, events

    def ingest_event(self, event: HomeEvent, cause: str = "scenario") -> HomeEvent:
        """Validate and record an externally injected event.

        Applies the event's declared state `sets` (a face-changed event also
        moves the face variable) and returns the event, stale-tagged if the
        source is currently Missing.  The caller dispatches it to rules.
        """
        desc = self._descriptors.get(event.source)
        if desc is None:
            raise UnknownDeviceError(f"unknown device {event.source!r}")
        kind = self.catalog.kind(desc.kind)
        ev = kind.events.get(event.event_type)
        if ev is None:
            raise EventSchemaError(f"{desc.kind} has no event {event.event_type!r}")
        if set(event.payload) != set(ev.fields):
            raise EventSchemaError(
                f"payload fields {sorted(event.payload)} != schema {sorted(ev.fields)}"
            )
        for fname, dom in ev.fields.items():
            if not dom.contains(event.payload[fname]):
                raise EventSchemaError(f"payload {fname}={event.payload[fname]!r} out of domain")
        stale = desc.availability == MISSING
        event = HomeEvent(
            source=event.source,
            event_type=event.event_type,
            payload=dict(event.payload),
            at=event.at,
            stale=stale,
        )
        if self._trace is not None:
            self._trace.record(
                at=event.at,
                category="device-event",
                subject=event.source,
                details={"event": event.event_type, "payload": dict(event.payload), "stale": stale},
                cause=cause,
            )
        if not stale:
            values = self._values[event.source]
            delta: dict[str, Value] = {}
            for var, spec in ev.sets.items():
                new = event.payload[spec.field] if isinstance(spec, PayloadRef) else spec
                if values.get(var) != new:
                    delta[var] = new
            for var, new in delta.items():
                values[var] = new
                self._updated_at[event.source][var] = event.at
            if delta and self._trace is not None:
                self._trace.record(
                    at=event.at,
                    category="state-change",
                    subject=event.source,
                    details={"changes": delta},
                    cause=cause,
                )
        return event
