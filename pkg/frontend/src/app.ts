// Application shell: tabs, stream wiring, clock controls.

import { HearthClient } from "./api.js";
import { DashboardController } from "./dashboard.js";
import { EditorController } from "./editor.js";
import { depGraphSvg, formatSimTime, timelineLanes } from "./render.js";
import { applyStreamItem, initialState, setDevices, setSnapshots, type AppState } from "./state.js";

const TABS = ["dashboard", "editor", "timeline", "graph"] as const;

export class App {
  state: AppState = initialState();
  private readonly client: HearthClient;
  private readonly dashboard: DashboardController;
  private readonly editor: EditorController;

  constructor(
    private readonly root: HTMLElement,
    base = "",
  ) {
    this.client = new HearthClient(base);
    this.root.innerHTML = `
      <header>
        <h1>hearth</h1>
        <nav>${TABS.map((t) => `<button data-tab="${t}">${t}</button>`).join("")}</nav>
        <div class="clockbar">
          <span id="sim-time"></span>
          <button id="advance-minute">+1 min</button>
          <button id="advance-hour">+1 hour</button>
          <span id="global-notice"></span>
        </div>
      </header>
      <main>
        <section id="tab-dashboard">
          <h2>devices</h2><div id="devices"></div>
          <h2>programs</h2><div id="programs"></div>
        </section>
        <section id="tab-editor" hidden><div id="editor"></div></section>
        <section id="tab-timeline" hidden><div id="timeline"></div></section>
        <section id="tab-graph" hidden><div id="graph"></div></section>
      </main>`;
    const pick = (id: string) => this.root.querySelector<HTMLElement>(id)!;
    this.editor = new EditorController(
      this.client,
      pick("#editor"),
      undefined,
      () => void this.refreshPrograms(),
    );
    this.dashboard = new DashboardController(
      this.client,
      pick("#devices"),
      pick("#programs"),
      (pid) => {
        void this.editor.loadProgram(pid);
        this.showTab("editor");
      },
      (text) => this.notice(text),
    );
    this.root.querySelectorAll<HTMLButtonElement>("nav button").forEach((btn) => {
      btn.addEventListener("click", () => this.showTab(btn.dataset.tab!));
    });
    pick("#advance-minute").addEventListener("click", () => void this.advance(60_000));
    pick("#advance-hour").addEventListener("click", () => void this.advance(3_600_000));
  }

  notice(text: string): void {
    const node = this.root.querySelector<HTMLElement>("#global-notice");
    if (node) {
      node.textContent = text;
    }
  }

  showTab(tab: string): void {
    for (const name of TABS) {
      const section = this.root.querySelector<HTMLElement>(`#tab-${name}`);
      if (section) {
        section.hidden = name !== tab;
      }
    }
    if (tab === "timeline") {
      void this.refreshTimeline();
    }
    if (tab === "graph") {
      void this.refreshGraph();
    }
  }

  private async advance(ms: number): Promise<void> {
    const clock = await this.client.clock();
    await this.client.setClock({ advance_to: clock.now + ms });
  }

  async refreshDevices(): Promise<void> {
    await this.dashboard.ensureCatalog();
    const reply = await this.client.listDevices();
    this.state = setDevices(this.state, reply.devices, reply.generation);
    this.dashboard.renderDevices(this.state);
  }

  async refreshPrograms(): Promise<void> {
    const reply = await this.client.listPrograms();
    this.state = setSnapshots(this.state, reply.programs.map((p) => p.snapshot));
    this.dashboard.renderPrograms(Object.values(this.state.snapshots));
  }

  async refreshTimeline(): Promise<void> {
    const reply = await this.client.traces({ limit: 400 });
    const root = this.root.querySelector<HTMLElement>("#timeline")!;
    root.textContent = "";
    root.appendChild(timelineLanes(reply.entries));
  }

  async refreshGraph(): Promise<void> {
    const reply = await this.client.depgraph(true);
    const root = this.root.querySelector<HTMLElement>("#graph")!;
    root.textContent = "";
    root.appendChild(depGraphSvg(reply.graph));
  }

  private renderClock(): void {
    const node = this.root.querySelector<HTMLElement>("#sim-time");
    if (node) {
      node.textContent = `${formatSimTime(this.state.now)} (${this.state.clockMode})`;
    }
  }

  /** Boot: initial fetches plus the push stream. */
  async start(signal?: AbortSignal): Promise<void> {
    await this.refreshDevices();
    await this.refreshPrograms();
    await this.editor.refreshPalette();
    this.renderClock();
    void this.client
      .streamEvents((item) => {
        const before = this.state;
        this.state = applyStreamItem(this.state, item);
        if (this.state === before) {
          return; // duplicate
        }
        if (item.type === "registry") {
          void this.refreshDevices();
          void this.editor.onRegistryChange();
        }
        if (item.type === "snapshot") {
          this.dashboard.renderPrograms(Object.values(this.state.snapshots));
        }
        if (item.type === "trace" || item.type === "clock" || item.type === "hello") {
          this.renderClock();
        }
      }, signal)
      .catch(() => this.notice("event stream disconnected"));
  }
}

export function boot(): void {
  const root = document.getElementById("app");
  if (root) {
    const app = new App(root);
    void app.start();
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
