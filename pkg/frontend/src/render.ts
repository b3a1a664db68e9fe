// Pure DOM builders: (gateway facts, prefs) -> elements. No fetching, no
// state, so DOM-snapshot tests can pin the rendering of any snapshot.

import type {
  CatalogJson,
  CompletionOptionJson,
  DepGraphJson,
  DeviceJson,
  SnapshotJson,
  TokenJson,
  TraceEntryJson,
} from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

// status -> (glyph char, css class); running/stopped are green, degraded orange
export const STATUS_GLYPH: Record<string, { char: string; cls: string; label: string }> = {
  running: { char: "▶", cls: "glyph-running", label: "running" },
  degraded: { char: "▶", cls: "glyph-degraded", label: "running at risk" },
  stopped: { char: "■", cls: "glyph-stopped", label: "stopped" },
};

export function statusGlyph(status: string): HTMLElement {
  const spec = STATUS_GLYPH[status] ?? { char: "?", cls: "glyph-unknown", label: status };
  const span = el("span", `glyph ${spec.cls}`, spec.char);
  span.title = spec.label;
  span.setAttribute("data-status", status);
  return span;
}

export function tokenSpan(token: TokenJson): HTMLElement {
  const span = el("span", `token token-${token.category}`, token.text);
  if (token.unknown) {
    span.classList.add("token-unknown");
    span.title = "references a device that is no longer available";
  }
  if (token.path) {
    span.setAttribute("data-path", token.path);
  }
  return span;
}

export function tokenStrip(tokens: TokenJson[], holeAt?: number): HTMLElement {
  const strip = el("div", "token-strip");
  tokens.forEach((token, i) => {
    if (holeAt === i) {
      strip.appendChild(el("span", "hole", "‸"));
    }
    strip.appendChild(tokenSpan(token));
  });
  if (holeAt === undefined || holeAt >= tokens.length) {
    strip.appendChild(el("span", "hole hole-active", "‸"));
  }
  return strip;
}

export function paletteButton(option: CompletionOptionJson): HTMLButtonElement {
  const btn = el("button", `palette-option cat-${option.category}`);
  btn.textContent = option.free_text ? `${option.token.text}…` : option.token.text;
  btn.setAttribute("data-terminal", option.token.terminal_key);
  if (option.availability === "state-filtered-out") {
    btn.classList.add("state-filtered");
    btn.title = "would not change the device's current state";
  }
  if (option.free_text) {
    btn.classList.add("free-text");
  }
  return btn;
}

export function deviceCard(
  device: DeviceJson,
  catalog: CatalogJson | null,
  handlers?: {
    onAction?: (id: string, action: string, args?: Record<string, unknown>) => void;
    onCritical?: (id: string, critical: boolean) => void;
  },
): HTMLElement {
  const card = el("div", `device-card availability-${device.availability}`);
  card.setAttribute("data-device", device.id);
  const head = el("div", "card-head");
  head.appendChild(el("span", "device-name", device.display_name));
  head.appendChild(el("span", "device-kind", device.kind));
  if (device.location) {
    head.appendChild(el("span", "device-location", device.location));
  }
  if (device.critical) {
    const badge = el("span", "critical-badge", "critical");
    badge.title = "power-removing actions are refused";
    head.appendChild(badge);
  }
  if (device.availability !== "available") {
    head.appendChild(el("span", "missing-badge", "missing"));
  }
  card.appendChild(head);

  const stateList = el("dl", "device-state");
  for (const [variable, value] of Object.entries(device.state).sort()) {
    stateList.appendChild(el("dt", undefined, variable));
    stateList.appendChild(el("dd", undefined, String(value)));
  }
  card.appendChild(stateList);

  const actions = el("div", "device-actions");
  const kindSpec = catalog?.kinds[device.kind];
  for (const [name, spec] of Object.entries(kindSpec?.actions ?? {})) {
    const btn = el("button", "device-action", spec.display);
    btn.disabled = device.availability !== "available";
    btn.setAttribute("data-action", name);
    if (handlers?.onAction) {
      btn.addEventListener("click", () => {
        if (spec.param && spec.param.domain.options?.length) {
          const value = spec.param.domain.options[0];
          handlers.onAction!(device.id, name, { [spec.param.name]: value });
        } else {
          handlers.onAction!(device.id, name);
        }
      });
    }
    actions.appendChild(btn);
  }
  const critBtn = el(
    "button",
    "device-critical-toggle",
    device.critical ? "clear critical" : "mark critical",
  );
  if (handlers?.onCritical) {
    critBtn.addEventListener("click", () => handlers.onCritical!(device.id, !device.critical));
  }
  actions.appendChild(critBtn);
  card.appendChild(actions);
  return card;
}

export function programCard(
  snapshot: SnapshotJson,
  handlers?: {
    onStart?: (id: string) => void;
    onStop?: (id: string) => void;
    onEdit?: (id: string) => void;
  },
): HTMLElement {
  const card = el("div", `program-card status-${snapshot.status}`);
  card.setAttribute("data-program", snapshot.program_id);
  const head = el("div", "card-head");
  head.appendChild(statusGlyph(snapshot.status));
  head.appendChild(el("span", "program-name", snapshot.name));
  card.appendChild(head);

  const counters = el("div", "program-counters");
  const stmt = Object.entries(snapshot.stmt_counters).sort();
  const rules = Object.entries(snapshot.rule_counters).sort();
  counters.appendChild(
    el("span", "counter-imperative", `statements: ${stmt.map(([p, n]) => `${p}=${n}`).join(" ") || "none"}`),
  );
  counters.appendChild(
    el("span", "counter-rules", `rules: ${rules.map(([r, n]) => `#${r}=${n}`).join(" ") || "none"}`),
  );
  if (snapshot.waiting_points.length) {
    counters.appendChild(
      el("span", "waiting-points", `waiting: ${snapshot.waiting_points.map((i) => `#${i}`).join(" ")}`),
    );
  }
  if (snapshot.unknown_refs.length) {
    counters.appendChild(el("span", "unknown-refs", `unknown: ${snapshot.unknown_refs.join(", ")}`));
  }
  card.appendChild(counters);

  const buttons = el("div", "program-buttons");
  const startBtn = el("button", "program-start", "start");
  startBtn.disabled = snapshot.status !== "stopped";
  const stopBtn = el("button", "program-stop", "stop");
  stopBtn.disabled = snapshot.status === "stopped";
  const editBtn = el("button", "program-edit", "edit");
  if (handlers?.onStart) {
    startBtn.addEventListener("click", () => handlers.onStart!(snapshot.program_id));
  }
  if (handlers?.onStop) {
    stopBtn.addEventListener("click", () => handlers.onStop!(snapshot.program_id));
  }
  if (handlers?.onEdit) {
    editBtn.addEventListener("click", () => handlers.onEdit!(snapshot.program_id));
  }
  buttons.append(startBtn, stopBtn, editBtn);
  card.appendChild(buttons);
  return card;
}

const LANE_CATEGORIES = [
  "device-event",
  "state-change",
  "action",
  "rule-fired",
  "degraded-skip",
  "denial",
  "program-lifecycle",
  "registry-change",
];

export function timelineLanes(entries: TraceEntryJson[]): HTMLElement {
  const wrap = el("div", "timeline");
  if (!entries.length) {
    wrap.appendChild(el("p", "timeline-empty", "no entries in range"));
    return wrap;
  }
  const t0 = entries[0].at;
  const t1 = Math.max(entries[entries.length - 1].at, t0 + 1);
  const subjects = [...new Set(entries.map((e) => e.subject))];
  for (const subject of subjects) {
    const lane = el("div", "timeline-lane");
    lane.setAttribute("data-subject", subject);
    lane.appendChild(el("span", "lane-label", subject));
    const track = el("div", "lane-track");
    for (const entry of entries) {
      if (entry.subject !== subject) {
        continue;
      }
      const dot = el(
        "span",
        `lane-dot cat-${LANE_CATEGORIES.includes(entry.category) ? entry.category : "other"}`,
      );
      dot.style.left = `${(((entry.at - t0) / (t1 - t0)) * 100).toFixed(2)}%`;
      dot.title = `${entry.at} ms · ${entry.category} · ${JSON.stringify(entry.details)}`;
      dot.setAttribute("data-seq", String(entry.seq));
      track.appendChild(dot);
    }
    lane.appendChild(track);
    wrap.appendChild(lane);
  }
  return wrap;
}

const SVG_NS = "http://www.w3.org/2000/svg";

export function depGraphSvg(graph: DepGraphJson): SVGSVGElement {
  const rowGap = 64;
  const width = 720;
  const height = Math.max(graph.programs.length, graph.devices.length) * rowGap + 60;
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "depgraph");

  const conflictIds = new Set(graph.conflicts.map((c) => c.device_id));
  const activeIds = new Set(
    graph.conflicts.filter((c) => c.activity === "active").map((c) => c.device_id),
  );
  const programY = new Map<string, number>();
  const deviceY = new Map<string, number>();
  graph.programs.forEach((p, i) => programY.set(p.program_id, 50 + i * rowGap));
  graph.devices.forEach((d, i) => deviceY.set(d.device_id, 50 + i * rowGap));
  const px = 150;
  const dx = width - 170;

  for (const edge of graph.edges) {
    const y1 = programY.get(edge.src);
    const y2 = edge.kind === "controls" ? programY.get(edge.dst) : deviceY.get(edge.dst);
    if (y1 === undefined || y2 === undefined) {
      continue;
    }
    const line = document.createElementNS(SVG_NS, "path");
    const x2 = edge.kind === "controls" ? px : dx;
    line.setAttribute(
      "d",
      `M ${px + 10} ${y1} C ${(px + dx) / 2} ${y1}, ${(px + dx) / 2} ${y2}, ${x2 - 10} ${y2}`,
    );
    let cls = `edge edge-${edge.kind}`;
    if (edge.kind === "writes" && conflictIds.has(edge.dst)) {
      cls += activeIds.has(edge.dst) ? " edge-conflict edge-conflict-active" : " edge-conflict";
    }
    line.setAttribute("class", cls);
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `${edge.kind}${edge.detail ? " " + edge.detail : ""}: ${edge.via.join(", ")}`;
    line.appendChild(title);
    svg.appendChild(line);
  }

  for (const p of graph.programs) {
    const y = programY.get(p.program_id)!;
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("class", `gnode gprogram status-${p.status ?? "unknown"}`);
    group.setAttribute("data-program", p.program_id);
    const shape = document.createElementNS(SVG_NS, p.status === "stopped" ? "rect" : "polygon");
    if (p.status === "stopped") {
      shape.setAttribute("x", String(px - 8));
      shape.setAttribute("y", String(y - 8));
      shape.setAttribute("width", "16");
      shape.setAttribute("height", "16");
    } else {
      shape.setAttribute(
        "points",
        `${px - 8},${y - 8} ${px - 8},${y + 8} ${px + 9},${y}`,
      );
    }
    group.appendChild(shape);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(px - 16));
    label.setAttribute("y", String(y + 4));
    label.setAttribute("text-anchor", "end");
    label.textContent = p.name;
    group.appendChild(label);
    svg.appendChild(group);
  }

  for (const d of graph.devices) {
    const y = deviceY.get(d.device_id)!;
    const group = document.createElementNS(SVG_NS, "g");
    let cls = `gnode gdevice availability-${d.availability}`;
    if (conflictIds.has(d.device_id)) {
      cls += " gconflict";
    }
    group.setAttribute("class", cls);
    group.setAttribute("data-device", d.device_id);
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(dx));
    circle.setAttribute("cy", String(y));
    circle.setAttribute("r", "9");
    group.appendChild(circle);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(dx + 16));
    label.setAttribute("y", String(y + 4));
    label.textContent = d.display_name;
    group.appendChild(label);
    svg.appendChild(group);
  }
  return svg;
}

export function formatSimTime(ms: number): string {
  const days = Math.floor(ms / 86_400_000);
  const rest = ms % 86_400_000;
  const hh = String(Math.floor(rest / 3_600_000)).padStart(2, "0");
  const mm = String(Math.floor((rest % 3_600_000) / 60_000)).padStart(2, "0");
  const ss = String(Math.floor((rest % 60_000) / 1000)).padStart(2, "0");
  return days ? `day ${days} ${hh}:${mm}:${ss}` : `${hh}:${mm}:${ss}`;
}
