"""HTTP gateway: REST endpoints plus a server-push event stream.

The gateway holds no authoritative state.  Every call runs as a closure on
the single command queue, so concurrent clients serialize into one total
order and replies carry the registry generation they observed.  Stream
pushes mirror trace entries and registry deltas one-to-one.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time as _wall
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .. import depgraph as depgraph_mod
from ..catalog import Catalog, load_catalog
from ..clock import ACCELERATED, MODES, REALTIME, SIMULATED, SimClock
from ..errors import (
    CriticalDeviceDeniedError,
    DuplicateDeviceError,
    HearthError,
    MissingDeviceError,
    ParseError,
    ProgramNotFoundError,
    ProgramStateError,
    ScenarioError,
    StaleOptionError,
    UnknownDeviceError,
)
from ..keyboard import CompletionOption, Draft, InsertionPoint, apply_option, current_point, delete_at, options
from ..language.grammar import derive_grammar
from ..language.render import render
from ..language.validate import validate
from ..registry import DeviceDescriptor, HomeEvent
from ..runtime import Runtime
from ..trace import RedactionPolicy, TimelineQuery, TraceLog
from .commands import CommandQueue
from .scenario import Scenario, load_scenario, schedule
from .store import ProgramStore

log = logging.getLogger("hearth.gateway")

_STATUS_BY_CODE = {
    UnknownDeviceError.code: 404,
    ProgramNotFoundError.code: 404,
    DuplicateDeviceError.code: 409,
    MissingDeviceError.code: 409,
    ProgramStateError.code: 409,
    StaleOptionError.code: 409,
    CriticalDeviceDeniedError.code: 403,
}


@dataclass
class GatewayConfig:
    port: int = 8740
    state_dir: Path = Path("./state")
    catalog_path: Optional[Path] = None  # None: packaged default catalog
    scenario_path: Optional[Path] = None
    clock_mode: str = SIMULATED
    clock_factor: float = 10.0
    log_level: str = "info"
    ui_dir: Optional[Path] = None


class Gateway:
    """Owns the runtime, persistence, scenario, and stream fan-out."""

    def __init__(self, config: GatewayConfig, catalog: Optional[Catalog] = None):
        self.config = config
        if catalog is None:
            if config.catalog_path is not None:
                catalog = load_catalog(config.catalog_path)
            else:
                from ..catalog import default_catalog

                catalog = default_catalog()
        self.catalog = catalog

        state_dir = Path(config.state_dir)
        state_dir.mkdir(parents=True, exist_ok=True)
        self.trace = TraceLog(state_dir / "traces" / "trace.log")
        # simulated time is the home's time; it survives restarts
        clock = SimClock(now=self.trace.last_at, mode=config.clock_mode, factor=config.clock_factor)
        self.runtime = Runtime(
            self.catalog, trace=self.trace, clock=clock, on_snapshot_change=self._push_snapshot
        )
        self.store = ProgramStore(state_dir / "programs")
        self.drafts_dir = state_dir / "drafts"
        self.drafts_dir.mkdir(parents=True, exist_ok=True)

        self._subscribers: list[queue.Queue] = []
        self._subscribers_lock = threading.Lock()
        self._stream_seq = 0
        self.trace.subscribe(self._push_trace)
        self.runtime.subscribe_registry(self._push_delta)

        self.commands = CommandQueue()
        self.scenario: Optional[Scenario] = None
        self._accel_thread: Optional[threading.Thread] = None
        self._accel_stop = threading.Event()

        # programs restart Stopped; mid-run interpreter state is not persisted
        loaded = self.commands.call(self._load_programs)
        log.info("loaded %d stored programs", loaded)
        if config.scenario_path is not None:
            scenario = load_scenario(config.scenario_path, self.catalog)
            self.commands.call(lambda: self._load_scenario(scenario))

    # -- plumbing ------------------------------------------------------------

    def _load_programs(self) -> int:
        grammar = self._store_grammar()
        for pid, program in self.store.load_all(grammar).items():
            self.runtime.load_program(program)
        return len(self.runtime.programs)

    def _load_scenario(self, scenario: Scenario) -> dict:
        self.scenario = scenario
        n = schedule(scenario, self.runtime)
        return {"name": scenario.name, "steps": n, "end_at": scenario.end_at}

    def _store_grammar(self, extra: tuple = ()):        # permissive: for persistence
        known = dict(self.store.known_programs())
        for pid, name in extra:
            known[pid] = name
        return derive_grammar(
            self.runtime.registry.snapshot(),
            known_programs=sorted(known.items()),
            include_missing=True,
        )

    def _edit_grammar(self):  # strict: what the home offers right now
        return derive_grammar(
            self.runtime.registry.snapshot(),
            known_programs=self.store.known_programs(),
        )

    def generation(self) -> int:
        return self.runtime.registry.generation

    # -- stream fan-out ---------------------------------------------------------

    def _push(self, type_: str, data: dict) -> None:
        with self._subscribers_lock:
            self._stream_seq += 1
            item = {"stream_seq": self._stream_seq, "type": type_, "data": data}
            for q in self._subscribers:
                try:
                    q.put_nowait(item)
                except queue.Full:  # slow client: it will resync via queries
                    pass

    def _push_trace(self, entry) -> None:
        self._push(
            "trace",
            {
                "seq": entry.seq,
                "at": entry.at,
                "category": entry.category,
                "subject": entry.subject,
                "details": entry.details,
                "cause": entry.cause,
            },
        )

    def _push_delta(self, delta) -> None:
        self._push(
            "registry",
            {"generation": delta.generation, "change": delta.change, "device_id": delta.device_id},
        )

    def _push_snapshot(self, snap) -> None:
        self._push("snapshot", snap.to_json())

    def _push_clock(self) -> None:
        self._push(
            "clock",
            {"now": self.runtime.clock.now, "mode": self.runtime.clock.mode, "factor": self.runtime.clock.factor},
        )

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=1000)
        with self._subscribers_lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._subscribers_lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    # -- accelerated/realtime driver -----------------------------------------------

    def _accel_loop(self) -> None:
        anchor_wall = _wall.monotonic()
        anchor_sim = self.runtime.clock.now
        while not self._accel_stop.wait(0.02):
            if self.runtime.clock.mode not in (ACCELERATED, REALTIME):
                return
            factor = self.runtime.clock.factor if self.runtime.clock.mode == ACCELERATED else 1.0
            target = anchor_sim + int((_wall.monotonic() - anchor_wall) * 1000 * factor)

            def tick(target=target):
                if self.runtime.clock.mode in (ACCELERATED, REALTIME) and target > self.runtime.clock.now:
                    self.runtime._advance_to(target)
                    self._push_clock()

            self.commands.call(tick)

    def set_clock(self, mode: Optional[str], factor: Optional[float]) -> dict:
        clock = self.runtime.clock
        if mode is not None:
            if mode not in MODES:
                raise ProgramStateError(f"unknown clock mode {mode!r}")
            clock.set_mode(mode, factor)
        elif factor is not None:
            clock.set_mode(clock.mode, factor)
        if clock.mode in (ACCELERATED, REALTIME):
            if self._accel_thread is None or not self._accel_thread.is_alive():
                self._accel_stop.clear()
                self._accel_thread = threading.Thread(
                    target=self._accel_loop, name="hearth-clock", daemon=True
                )
                self._accel_thread.start()
        else:
            self._accel_stop.set()
        return {"now": clock.now, "mode": clock.mode, "factor": clock.factor}

    def close(self) -> None:
        self._accel_stop.set()
        self.commands.close()
        self.trace.close()


def build_app(gateway: Gateway) -> FastAPI:
    app = FastAPI(title="hearth", version="0.1.0", docs_url=None, redoc_url=None)
    gw = gateway
    app.state.gateway = gw

    @app.exception_handler(HearthError)
    async def hearth_error_handler(request: Request, exc: HearthError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        body = {
            "error": {
                "code": exc.code,
                "message": str(exc),
                "generation": gw.generation(),
            }
        }
        if isinstance(exc, ParseError):
            body["error"]["position"] = exc.position
            body["error"]["expected"] = list(exc.expected)
        return JSONResponse(status_code=status, content=body)

    def reply(data: dict, **extra) -> dict:
        out = {"generation": gw.generation(), **data, **extra}
        return out

    # -- catalog (read-only vocabulary for clients) ---------------------------

    @app.get("/api/catalog")
    def get_catalog():
        def domain_json(dom):
            out = {"type": dom.kind}
            opts = dom.option_values()
            if opts is not None:
                out["options"] = [dom.display(v) for v in opts]
            return out

        kinds = {}
        for kname in sorted(gw.catalog.kinds):
            kind = gw.catalog.kind(kname)
            kinds[kname] = {
                "vars": {v: domain_json(d) for v, d in sorted(kind.state_vars.items())},
                "actions": {
                    a.name: {
                        "display": a.display,
                        "param": None
                        if a.param is None
                        else {"name": a.param[0], "domain": domain_json(a.param[1])},
                        "power_removing": a.power_removing,
                    }
                    for a in sorted(kind.actions.values(), key=lambda a: a.name)
                },
                "events": {
                    e.name: {"display": e.display, "trigger_param": e.trigger_param}
                    for e in sorted(kind.events.values(), key=lambda e: e.name)
                },
            }
        return {"generation": gw.generation(), "kinds": kinds}

    # -- devices ------------------------------------------------------------

    @app.get("/api/devices")
    def list_devices():
        def run():
            snap = gw.runtime.registry.snapshot()
            devices = []
            for d in snap.descriptors:
                devices.append(
                    {
                        "id": d.id,
                        "kind": d.kind,
                        "display_name": d.display_name,
                        "location": d.location,
                        "properties": dict(d.properties),
                        "critical": d.critical,
                        "availability": d.availability,
                        "state": dict(sorted(snap.states.get(d.id, {}).items())),
                    }
                )
            return reply({"devices": devices, "clock": gw.runtime.clock.now})

        return gw.commands.call(run)

    @app.post("/api/devices")
    def register_device(payload: dict = Body(...)):
        def run():
            desc = DeviceDescriptor(
                id=payload["id"],
                kind=payload["kind"],
                display_name=payload.get("name", payload["id"]),
                location=payload.get("location", ""),
                properties=payload.get("properties", {}),
                critical=bool(payload.get("critical", False)),
            )
            delta = gw.runtime.register_device(desc, payload.get("state"), cause="dashboard")
            return reply({"change": delta.change, "device_id": delta.device_id})

        return gw.commands.call(run)

    @app.delete("/api/devices/{device_id}")
    def unregister_device(device_id: str):
        def run():
            delta = gw.runtime.unregister_device(device_id, cause="dashboard")
            return reply({"change": delta.change, "device_id": delta.device_id})

        return gw.commands.call(run)

    @app.post("/api/devices/{device_id}/action")
    def device_action(device_id: str, payload: dict = Body(...)):
        def run():
            delta = gw.runtime.device_action(
                device_id, payload["action"], payload.get("args"), cause="dashboard"
            )
            return reply({"changes": delta})

        return gw.commands.call(run)

    @app.post("/api/devices/{device_id}/critical")
    def set_critical(device_id: str, payload: dict = Body(...)):
        def run():
            delta = gw.runtime.set_critical(device_id, bool(payload["critical"]), cause="dashboard")
            return reply({"change": delta.change, "device_id": delta.device_id})

        return gw.commands.call(run)

    @app.post("/api/devices/{device_id}/events")
    def emit_event(device_id: str, payload: dict = Body(...)):
        def run():
            event = HomeEvent(
                source=device_id,
                event_type=payload["event"],
                payload=payload.get("payload", {}),
                at=gw.runtime.clock.now,
            )
            gw.runtime.ingest_event(event, cause=payload.get("cause", "scenario"))
            return reply({"queued": True})

        return gw.commands.call(run)

    # -- programs -----------------------------------------------------------------

    def _program_entry(pid: str) -> dict:
        snap = gw.runtime.snapshot(pid)
        return {
            "program_id": pid,
            "name": gw.runtime.programs[pid].name,
            "text": gw.store.get_text(pid),
            "snapshot": snap.to_json(),
        }

    @app.get("/api/programs")
    def list_programs():
        def run():
            return reply({"programs": [_program_entry(pid) for pid in sorted(gw.runtime.programs)]})

        return gw.commands.call(run)

    @app.get("/api/programs/{program_id}")
    def get_program(program_id: str):
        def run():
            if program_id not in gw.runtime.programs:
                raise ProgramNotFoundError(f"no stored program {program_id!r}")
            program = gw.runtime.programs[program_id]
            report = validate(
                program,
                gw.runtime.registry.snapshot(),
                known_programs=[pid for pid, _ in gw.store.known_programs()],
            )
            entry = _program_entry(program_id)
            entry["validation"] = {
                "unknown_refs": [{"path": p, "device_id": d} for p, d in report.unknown_refs],
                "type_errors": report.type_errors,
                "errors": report.errors,
            }
            return reply(entry)

        return gw.commands.call(run)

    @app.get("/api/programs/{program_id}/tokens")
    def program_tokens(program_id: str):
        def run():
            if program_id not in gw.runtime.programs:
                raise ProgramNotFoundError(f"no stored program {program_id!r}")
            grammar = gw._edit_grammar()
            toks = render(gw.runtime.programs[program_id], grammar)
            snap = gw.runtime.registry.snapshot()
            out = []
            for t in toks:
                unknown = False
                if t.category == "device":
                    desc = snap.device(str(t.value))
                    unknown = desc is None or desc.availability != "available"
                out.append(
                    {
                        "text": t.text,
                        "category": t.category,
                        "terminal_key": t.terminal_key,
                        "value": t.value,
                        "path": t.path,
                        "unknown": unknown,
                    }
                )
            return reply({"tokens": out})

        return gw.commands.call(run)

    @app.put("/api/programs/{program_id}")
    def save_program(program_id: str, payload: dict = Body(...)):
        def run():
            name = payload.get("name", program_id)
            if name != program_id:
                raise ProgramStateError("program id and name must match")
            grammar = gw._store_grammar(extra=((name, name),))
            try:
                current = gw.store.get_text(program_id)
            except ProgramNotFoundError:
                current = None
            if current == payload["text"]:
                # idempotent no-op: legal even while the instance runs
                if program_id not in gw.runtime.programs:
                    gw.runtime.load_program(gw.store.load(program_id, grammar))
                return reply({"program_id": program_id, "changed": False})
            if (
                program_id in gw.runtime.instances
                and gw.runtime.instances[program_id].status != "stopped"
            ):
                raise ProgramStateError(f"{program_id!r} is running; stop it first")
            program, changed = gw.store.save(name, payload["text"], grammar)
            gw.runtime.load_program(program)
            return reply({"program_id": program.program_id, "changed": changed})

        return gw.commands.call(run)

    @app.delete("/api/programs/{program_id}")
    def delete_program(program_id: str):
        def run():
            gw.runtime.remove_program(program_id)
            existed = gw.store.delete(program_id)
            return reply({"deleted": existed})

        return gw.commands.call(run)

    @app.post("/api/programs/{program_id}/start")
    def start_program(program_id: str):
        def run():
            program = gw.runtime.programs.get(program_id)
            if program is None:
                raise ProgramNotFoundError(f"no stored program {program_id!r}")
            report = validate(
                program,
                gw.runtime.registry.snapshot(),
                known_programs=[pid for pid, _ in gw.store.known_programs()],
            )
            if not report.activatable:
                raise ProgramStateError(
                    "program is not activatable: " + "; ".join(report.errors + report.type_errors)
                )
            snap = gw.runtime.start(program_id, cause="dashboard")
            return reply({"snapshot": snap.to_json()})

        return gw.commands.call(run)

    @app.post("/api/programs/{program_id}/stop")
    def stop_program(program_id: str):
        def run():
            snap = gw.runtime.stop(program_id, cause="dashboard")
            return reply({"snapshot": snap.to_json()})

        return gw.commands.call(run)

    @app.get("/api/programs/{program_id}/snapshot")
    def program_snapshot(program_id: str):
        def run():
            return reply({"snapshot": gw.runtime.snapshot(program_id).to_json()})

        return gw.commands.call(run)

    # -- drafts (savable, not runnable) ----------------------------------------------

    @app.get("/api/drafts")
    def list_drafts():
        def run():
            return reply({"drafts": sorted(p.stem for p in gw.drafts_dir.glob("*.json"))})

        return gw.commands.call(run)

    @app.get("/api/drafts/{name}")
    def get_draft(name: str):
        def run():
            path = gw.drafts_dir / f"{name}.json"
            if not path.exists():
                raise ProgramNotFoundError(f"no draft {name!r}")
            return reply({"draft": json.loads(path.read_text(encoding="utf-8"))})

        return gw.commands.call(run)

    @app.put("/api/drafts/{name}")
    def save_draft(name: str, payload: dict = Body(...)):
        def run():
            draft = Draft.from_json(payload["draft"])
            path = gw.drafts_dir / f"{name}.json"
            path.write_text(json.dumps(draft.to_json(), sort_keys=True), encoding="utf-8")
            return reply({"saved": name})

        return gw.commands.call(run)

    @app.delete("/api/drafts/{name}")
    def delete_draft(name: str):
        def run():
            path = gw.drafts_dir / f"{name}.json"
            existed = path.exists()
            if existed:
                path.unlink()
            return reply({"deleted": existed})

        return gw.commands.call(run)

    # -- smart keyboard ------------------------------------------------------------

    @app.post("/api/completion/options")
    def completion_options(payload: dict = Body(...)):
        def run():
            draft = Draft.from_json(payload.get("draft", {"tokens": []}))
            grammar = gw._edit_grammar()
            snap = gw.runtime.registry.snapshot()
            point = (
                InsertionPoint.from_json(payload["point"])
                if "point" in payload and payload["point"] is not None
                else current_point(draft, grammar)
            )
            opts = options(draft, point, snap, grammar=grammar)
            return reply(
                {
                    "point": point.to_json(),
                    "options": [o.to_json() for o in opts],
                }
            )

        return gw.commands.call(run)

    @app.post("/api/completion/apply")
    def completion_apply(payload: dict = Body(...)):
        def run():
            draft = Draft.from_json(payload["draft"])
            option = CompletionOption.from_json(payload["option"])
            grammar = gw._edit_grammar()
            snap = gw.runtime.registry.snapshot()
            point = (
                InsertionPoint.from_json(payload["point"])
                if payload.get("point") is not None
                else current_point(draft, grammar)
            )
            new_draft, next_point = apply_option(
                draft, point, option, snap, grammar=grammar, text=payload.get("text")
            )
            return reply({"draft": new_draft.to_json(), "point": next_point.to_json()})

        return gw.commands.call(run)

    @app.post("/api/completion/delete")
    def completion_delete(payload: dict = Body(...)):
        def run():
            draft = Draft.from_json(payload["draft"])
            grammar = gw._edit_grammar()
            snap = gw.runtime.registry.snapshot()
            point = InsertionPoint.from_json(payload["point"])
            new_draft, next_point = delete_at(draft, point, snap, grammar=grammar)
            return reply({"draft": new_draft.to_json(), "point": next_point.to_json()})

        return gw.commands.call(run)

    # -- traces ------------------------------------------------------------------------

    def _parse_query(params: dict) -> TimelineQuery:
        def intval(name):
            v = params.get(name)
            return int(v) if v is not None else None

        return TimelineQuery(
            from_at=intval("from_at"),
            to_at=intval("to_at"),
            subject=params.get("subject"),
            category=params.get("category"),
            limit=intval("limit"),
            cursor=intval("cursor"),
        )

    @app.get("/api/traces")
    def traces(
        from_at: Optional[int] = None,
        to_at: Optional[int] = None,
        subject: Optional[str] = None,
        category: Optional[str] = None,
        limit: Optional[int] = None,
        cursor: Optional[int] = None,
    ):
        def run():
            result = gw.trace.query(
                TimelineQuery(
                    from_at=from_at,
                    to_at=to_at,
                    subject=subject,
                    category=category,
                    limit=limit,
                    cursor=cursor,
                )
            )
            return reply(
                {
                    "entries": [json.loads(e.to_json()) for e in result.entries],
                    "next_cursor": result.next_cursor,
                }
            )

        return gw.commands.call(run)

    @app.post("/api/traces/redacted")
    def traces_redacted(payload: dict = Body(...)):
        def run():
            q = _parse_query(payload.get("query", {}))
            pol = payload.get("policy", {})
            policy = RedactionPolicy(
                suppress_categories=tuple(pol.get("suppress_categories", ())),
                bucket_ms=pol.get("bucket_ms"),
                exempt_subjects=tuple(pol.get("exempt_subjects", ())),
            )
            result = gw.trace.redacted(q, policy)
            return reply(
                {
                    "entries": [json.loads(e.to_json()) for e in result.entries],
                    "next_cursor": result.next_cursor,
                }
            )

        return gw.commands.call(run)

    # -- dependency graph ------------------------------------------------------------------

    def _graph(annotated: bool):
        programs = [gw.runtime.programs[p] for p in sorted(gw.runtime.programs)]
        graph = depgraph_mod.extract(programs, gw.runtime.registry.snapshot())
        if annotated:
            snaps = {pid: gw.runtime.snapshot(pid) for pid in gw.runtime.programs}
            graph = depgraph_mod.annotate(graph, snaps)
        return graph

    @app.get("/api/depgraph")
    def depgraph(annotated: bool = True):
        def run():
            return reply({"graph": _graph(annotated).to_json()})

        return gw.commands.call(run)

    @app.get("/api/depgraph.dot")
    def depgraph_dot(annotated: bool = True):
        def run():
            return _graph(annotated).to_dot()

        return PlainTextResponse(gw.commands.call(run))

    # -- clock & scenario ---------------------------------------------------------------------

    @app.get("/api/clock")
    def get_clock():
        def run():
            c = gw.runtime.clock
            return reply({"now": c.now, "mode": c.mode, "factor": c.factor})

        return gw.commands.call(run)

    @app.post("/api/clock")
    def post_clock(payload: dict = Body(...)):
        def run():
            if "mode" in payload or "factor" in payload:
                gw.set_clock(payload.get("mode"), payload.get("factor"))
            if "advance_to" in payload:
                gw.runtime.advance(int(payload["advance_to"]))
            c = gw.runtime.clock
            return reply({"now": c.now, "mode": c.mode, "factor": c.factor})

        result = gw.commands.call(run)
        gw._push_clock()
        return result

    @app.post("/api/scenario/load")
    def scenario_load(payload: dict = Body(...)):
        scenario = load_scenario(payload["path"], gw.catalog)

        def run():
            return reply(gw._load_scenario(scenario))

        return gw.commands.call(run)

    @app.post("/api/scenario/play_to")
    def scenario_play_to(payload: dict = Body(...)):
        def run():
            steps = gw.runtime.advance(int(payload["at"]))
            return reply({"now": gw.runtime.clock.now, "processed": len(steps)})

        result = gw.commands.call(run)
        gw._push_clock()
        return result

    @app.post("/api/scenario/step")
    def scenario_step():
        def run():
            if gw.scenario is None:
                raise ScenarioError("no scenario loaded")
            nxt = gw.scenario.next_at(gw.runtime.clock.now)
            if nxt is None:
                return reply({"now": gw.runtime.clock.now, "done": True})
            gw.runtime.advance(nxt)
            return reply({"now": gw.runtime.clock.now, "done": False})

        result = gw.commands.call(run)
        gw._push_clock()
        return result

    # -- event stream -----------------------------------------------------------------------------

    @app.get("/api/events")
    def events():
        sub = gw.subscribe()

        def stream():
            try:
                hello = {
                    "stream_seq": 0,
                    "type": "hello",
                    "data": {"generation": gw.generation(), "now": gw.runtime.clock.now},
                }
                yield f"data: {json.dumps(hello)}\n\n"
                while True:
                    try:
                        item = sub.get(timeout=10.0)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    yield f"data: {json.dumps(item)}\n\n"
            finally:
                gw.unsubscribe(sub)

        return StreamingResponse(stream(), media_type="text/event-stream")

    if gw.config.ui_dir is not None and Path(gw.config.ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(gw.config.ui_dir), html=True), name="ui")

    return app
