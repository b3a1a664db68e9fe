"""Dependency graph: which programs read, write, start, or stop what.

Write-write sharing of a device by two programs is the conflict the graph
warns about; it is latent while at most one writer runs and active once two
or more do.  Selector-based writes are expanded against the registry at
extraction time, so graphs are stamped with the registry generation and
recomputed when the home changes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

from .errors import ProgramStateError
from .language.nodes import (
    ActionStatement,
    ById,
    EventTrigger,
    Program,
    StartStatement,
    StateTrigger,
    StopStatement,
    condition_atoms,
    statement_paths,
)
from .registry import AVAILABLE, RegistrySnapshot, resolve_selector
from .runtime import STOPPED, InstanceSnapshot

WRITES = "writes"
READS = "reads"
CONTROLS = "controls"


@dataclass(frozen=True)
class Edge:
    kind: str  # writes | reads | controls
    src: str  # program id
    dst: str  # device id, or program id for controls
    via: tuple[str, ...]  # statement/trigger paths justifying the edge
    detail: str = ""  # "start" / "stop" for controls


@dataclass(frozen=True)
class ProgramNode:
    program_id: str
    name: str
    status: Optional[str] = None  # filled by annotate


@dataclass(frozen=True)
class DeviceNode:
    device_id: str
    display_name: str
    availability: str  # available | missing | unknown (ghost)


@dataclass(frozen=True)
class Conflict:
    device_id: str
    writers: tuple[str, ...]
    activity: Optional[str] = None  # active | latent, filled by annotate


@dataclass(frozen=True)
class DepGraph:
    generation: int
    programs: tuple[ProgramNode, ...]
    devices: tuple[DeviceNode, ...]
    edges: tuple[Edge, ...]
    conflicts: tuple[Conflict, ...]
    annotated: bool = False

    def conflict_devices(self) -> tuple[str, ...]:
        return tuple(c.device_id for c in self.conflicts)

    def to_json(self) -> dict:
        return {
            "generation": self.generation,
            "annotated": self.annotated,
            "programs": [
                {"program_id": p.program_id, "name": p.name, "status": p.status}
                for p in self.programs
            ],
            "devices": [
                {
                    "device_id": d.device_id,
                    "display_name": d.display_name,
                    "availability": d.availability,
                }
                for d in self.devices
            ],
            "edges": [
                {"kind": e.kind, "src": e.src, "dst": e.dst, "via": list(e.via), "detail": e.detail}
                for e in self.edges
            ],
            "conflicts": [
                {"device_id": c.device_id, "writers": list(c.writers), "activity": c.activity}
                for c in self.conflicts
            ],
        }

    def to_dot(self) -> str:
        """Graphviz document for external viewers."""
        lines = ["digraph dependencies {", "  rankdir=LR;"]
        conflict_ids = set(self.conflict_devices())
        for p in self.programs:
            shape = {"running": "triangle", "degraded": "triangle", "stopped": "square"}.get(
                p.status or "", "box"
            )
            color = {"running": "green", "degraded": "orange", "stopped": "green"}.get(
                p.status or "", "black"
            )
            lines.append(
                f'  "{p.program_id}" [label="{p.name}" shape={shape} color={color}];'
            )
        for d in self.devices:
            style = "dashed" if d.availability != AVAILABLE else "solid"
            fill = "red" if d.device_id in conflict_ids else "black"
            lines.append(
                f'  "{d.device_id}" [label="{d.display_name}" shape=ellipse '
                f"style={style} color={fill}];"
            )
        for e in self.edges:
            attrs = {
                WRITES: "color=red" if e.dst in conflict_ids else "color=black",
                READS: "color=gray style=dashed",
                CONTROLS: "color=blue",
            }[e.kind]
            label = e.detail or e.kind
            lines.append(f'  "{e.src}" -> "{e.dst}" [{attrs} label="{label}"];')
        lines.append("}")
        return "\n".join(lines)


def _expand(selector, snapshot: RegistrySnapshot) -> tuple[str, ...]:
    """Like runtime resolution, but ById keeps Missing devices as ghosts."""
    if isinstance(selector, ById):
        return (selector.device_id,)
    return resolve_selector(selector, snapshot)


def extract(programs: Sequence[Program], snapshot: RegistrySnapshot) -> DepGraph:
    edge_map: dict[tuple[str, str, str, str], list[str]] = {}
    device_ids: set[str] = set()

    def note(kind: str, src: str, dst: str, via: str, detail: str = "") -> None:
        edge_map.setdefault((kind, src, dst, detail), []).append(via)

    for program in sorted(programs, key=lambda p: p.program_id):
        pid = program.program_id
        for path, stmt in statement_paths(program):
            if isinstance(stmt, ActionStatement):
                for did in _expand(stmt.selector, snapshot):
                    device_ids.add(did)
                    note(WRITES, pid, did, path)
            elif isinstance(stmt, StartStatement):
                note(CONTROLS, pid, stmt.program_id, path, detail="start")
            elif isinstance(stmt, StopStatement):
                note(CONTROLS, pid, stmt.program_id, path, detail="stop")
        for rule in program.rules:
            trig = rule.trigger
            if isinstance(trig, EventTrigger):
                for did in _expand(trig.selector, snapshot):
                    device_ids.add(did)
                    note(READS, pid, did, f"rules[{rule.index}].trigger")
            else:
                assert isinstance(trig, StateTrigger)
                for i, atom in enumerate(condition_atoms(trig.condition)):
                    for did in _expand(atom.selector, snapshot):
                        device_ids.add(did)
                        note(READS, pid, did, f"rules[{rule.index}].trigger.atom[{i}]")

    edges = tuple(
        Edge(kind=kind, src=src, dst=dst, via=tuple(vias), detail=detail)
        for (kind, src, dst, detail), vias in sorted(edge_map.items())
    )

    writers: dict[str, set[str]] = {}
    for e in edges:
        if e.kind == WRITES:
            writers.setdefault(e.dst, set()).add(e.src)
    conflicts = tuple(
        Conflict(device_id=did, writers=tuple(sorted(ws)))
        for did, ws in sorted(writers.items())
        if len(ws) >= 2
    )

    device_nodes = []
    for did in sorted(device_ids):
        desc = snapshot.device(did)
        if desc is None:
            device_nodes.append(DeviceNode(device_id=did, display_name=f"Unknown({did})", availability="unknown"))
        else:
            device_nodes.append(
                DeviceNode(device_id=did, display_name=desc.display_name, availability=desc.availability)
            )

    return DepGraph(
        generation=snapshot.generation,
        programs=tuple(
            ProgramNode(program_id=p.program_id, name=p.name)
            for p in sorted(programs, key=lambda p: p.program_id)
        ),
        devices=tuple(device_nodes),
        edges=edges,
        conflicts=conflicts,
    )


def annotate(
    graph: DepGraph,
    snapshots: Mapping[str, InstanceSnapshot],
    current_generation: Optional[int] = None,
) -> DepGraph:
    """Attach run statuses and classify conflicts active/latent."""
    if current_generation is not None and current_generation != graph.generation:
        raise ProgramStateError(
            f"graph from generation {graph.generation}, registry at {current_generation}"
        )

    def status_of(pid: str) -> str:
        snap = snapshots.get(pid)
        return snap.status if snap is not None else STOPPED

    programs = tuple(replace(p, status=status_of(p.program_id)) for p in graph.programs)
    conflicts = []
    for c in graph.conflicts:
        running = [w for w in c.writers if status_of(w) != STOPPED]
        conflicts.append(replace(c, activity="active" if len(running) >= 2 else "latent"))
    return replace(graph, programs=programs, conflicts=tuple(conflicts), annotated=True)
