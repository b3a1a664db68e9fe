"""Scenario files: the scripted stand-in for a physical home.

A scenario is a list of timed steps (device arrivals/departures, injected
events, criticality flips, markers) bound to the simulated clock, so playing
a scenario is nothing more than advancing time.  Loading validates eagerly
and reports the YAML line of the offending step.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import yaml

from ..catalog import Catalog
from ..errors import ScenarioError

STEP_OPS = ("register", "unregister", "emit", "set_critical", "marker")

_REQUIRED = {
    "register": ("id", "kind"),
    "unregister": ("id",),
    "emit": ("id", "event"),
    "set_critical": ("id", "critical"),
    "marker": (),
}


class _LineLoader(yaml.SafeLoader):
    """SafeLoader that records the source line of every mapping."""


def _construct_mapping(loader, node, deep=False):
    mapping = yaml.SafeLoader.construct_mapping(loader, node, deep=deep)
    mapping["__line__"] = node.start_mark.line + 1
    return mapping


_LineLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping
)


@dataclass(frozen=True)
class Scenario:
    name: str
    steps: tuple[dict, ...]  # sorted by `at`, file order preserved for ties

    @property
    def end_at(self) -> int:
        return self.steps[-1]["at"] if self.steps else 0

    def next_at(self, after: int) -> Optional[int]:
        for step in self.steps:
            if step["at"] > after:
                return step["at"]
        return None


def load_scenario(path: Union[str, Path], catalog: Optional[Catalog] = None) -> Scenario:
    path = Path(path)
    try:
        doc = yaml.load(path.read_text(encoding="utf-8"), Loader=_LineLoader)
    except OSError as exc:
        raise ScenarioError(f"unreadable scenario {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError(f"unparseable scenario {path}: {exc}", line=line) from exc
    if not isinstance(doc, dict):
        raise ScenarioError(f"scenario {path} must be a mapping", line=1)
    doc.pop("__line__", None)
    raw_steps = doc.get("steps")
    if not isinstance(raw_steps, list):
        raise ScenarioError(f"scenario {path} needs a 'steps' list", line=1)

    def strip_lines(node):
        if isinstance(node, dict):
            node.pop("__line__", None)
            for value in node.values():
                strip_lines(value)
        elif isinstance(node, list):
            for value in node:
                strip_lines(value)

    steps = []
    for i, step in enumerate(raw_steps):
        if not isinstance(step, dict):
            raise ScenarioError(f"step {i} is not a mapping")
        line = step.pop("__line__", None)
        strip_lines(step)
        if "at" not in step or not isinstance(step["at"], int) or step["at"] < 0:
            raise ScenarioError(f"step {i}: 'at' must be a non-negative integer", line=line)
        op = step.get("op")
        if op not in STEP_OPS:
            raise ScenarioError(f"step {i}: unknown op {op!r}", line=line)
        for fieldname in _REQUIRED[op]:
            if fieldname not in step:
                raise ScenarioError(f"step {i}: op {op!r} needs field {fieldname!r}", line=line)
        if op == "register":
            if catalog is not None and step["kind"] not in catalog:
                raise ScenarioError(
                    f"step {i}: unknown kind {step['kind']!r}", line=line
                )
            state = step.get("state")
            if catalog is not None:
                try:
                    catalog.validate_state(step["kind"], state or {})
                except Exception as exc:
                    raise ScenarioError(f"step {i}: bad initial state: {exc}", line=line)
        steps.append(dict(step, _index=i))

    steps.sort(key=lambda s: (s["at"], s["_index"]))
    for s in steps:
        s.pop("_index")
    return Scenario(name=str(doc.get("name", path.stem)), steps=tuple(steps))


def schedule(scenario: Scenario, runtime) -> int:
    """Queue every step on the simulated clock; nothing runs until advance."""
    for step in scenario.steps:
        runtime.clock.schedule(
            due=step["at"], owner="scenario", purpose="scenario", payload=dict(step)
        )
    return len(scenario.steps)
