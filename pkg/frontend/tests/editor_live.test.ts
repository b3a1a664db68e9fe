// Secondary acceptance: with the real gateway running, compose the Evening
// program purely through palette taps, activate it, watch the green
// triangle and the live counter move after an injected event, and see a
// mid-edit device departure refresh the palette without the vanished
// device.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { HearthClient } from "../src/api.js";
import { EditorController } from "../src/editor.js";
import { programCard } from "../src/render.js";
import type { SnapshotJson, StreamItem } from "../src/types.js";

let proc: ChildProcess;
let base: string;
let stateDir: string;
let client: HearthClient;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port"));
        return;
      }
      const port = address.port;
      srv.close(() => resolve(port));
    });
  });
}

async function waitForGateway(): Promise<void> {
  const deadline = Date.now() + 20_000;
  for (;;) {
    try {
      const r = await fetch(base + "/api/clock");
      if (r.ok) {
        return;
      }
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error("gateway did not come up");
    }
    await new Promise((r) => setTimeout(r, 100));
  }
}

beforeAll(async () => {
  stateDir = mkdtempSync(join(tmpdir(), "hearth-ui-"));
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  proc = spawn(
    "python3",
    [
      "-m",
      "hearth.gateway.cli",
      "--port",
      String(port),
      "--state-dir",
      stateDir,
      "--log-level",
      "warning",
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForGateway();
  client = new HearthClient(base);
  await client.registerDevice({
    id: "lamp-blue",
    kind: "lamp",
    name: "blue-lamp",
    location: "bedroom",
    state: { power: "off", color: "blue" },
  });
  await client.registerDevice({
    id: "lamp-desk",
    kind: "lamp",
    name: "desk-lamp",
    location: "bedroom",
    state: { power: "on", color: "white" },
  });
  await client.registerDevice({
    id: "cube",
    kind: "domicube",
    name: "DomiCube",
    location: "salon",
    state: { face: 1, battery: 80 },
  });
});

afterAll(() => {
  proc?.kill("SIGKILL");
  rmSync(stateDir, { recursive: true, force: true });
});

async function tapByText(editor: EditorController, text: string): Promise<void> {
  const byText = editor.palette.find((o) => o.token.text === text);
  if (byText) {
    await editor.tap(byText);
    return;
  }
  const free = editor.palette.find((o) => o.free_text);
  expect(free, `no palette option offers ${JSON.stringify(text)}`).toBeTruthy();
  await editor.tap(free!); // promptFn supplies the text
}

describe("editor liveness against the running gateway", () => {
  it("composes, activates, and observes live counters; palette refreshes on departures", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    let promptValue = "Evening";
    const editor = new EditorController(client, root, () => promptValue);
    await editor.refreshPalette();

    // only palette taps: free text enters solely through the name token
    for (const text of [
      "program",
      "Evening",
      "each time",
      "the blue-lamp",
      "is turned on",
      "do",
      "switch off",
      "all",
      "lamp",
      "located in",
      "bedroom",
    ]) {
      await tapByText(editor, text);
    }
    expect(editor.draftText()).toBe(
      "program Evening each time the blue-lamp is turned on do switch off all lamp located in bedroom",
    );
    // the palette buttons rendered in the DOM always match the engine state
    const buttons = [...root.querySelectorAll(".palette-option")];
    expect(buttons.length).toBe(editor.palette.length);

    // activation flows through save + start; the reply must show running
    const controller = new AbortController();
    const pushes: StreamItem[] = [];
    const streamDone = client
      .streamEvents((item) => pushes.push(item), controller.signal)
      .catch(() => {});
    const ok = await editor.activate();
    expect(ok).toBe(true);
    const snap0 = (await client.programSnapshot("Evening")).snapshot;
    expect(snap0.status).toBe("running");
    const card0 = programCard(snap0);
    expect(card0.querySelector(".glyph")?.getAttribute("data-status")).toBe("running");
    expect(card0.querySelector(".glyph")?.className).toContain("glyph-running");
    expect(card0.textContent).toContain("#0=0");

    // inject the trigger event; the rule fires and the counter moves,
    // observed through the push stream (no polling of our own math)
    await client.emitEvent("lamp-blue", "turned-on");
    const deadline = Date.now() + 10_000;
    let live: SnapshotJson | undefined;
    for (;;) {
      live = pushes
        .filter((p) => p.type === "snapshot")
        .map((p) => p.data as unknown as SnapshotJson)
        .find((s) => s.program_id === "Evening" && s.rule_counters["0"] === 1);
      if (live || Date.now() > deadline) {
        break;
      }
      await new Promise((r) => setTimeout(r, 50));
    }
    expect(live, "no live snapshot push showed the counter change").toBeTruthy();
    const card1 = programCard(live!);
    expect(card1.textContent).toContain("#0=1");
    // the desk lamp (bedroom) was switched off by the rule
    const devices = (await client.listDevices()).devices;
    expect(devices.find((d) => d.id === "lamp-desk")?.state.power).toBe("off");
    controller.abort();
    await streamDone;

    // fresh draft: mid-edit departure refreshes the palette visibly
    editor.clear();
    promptValue = "Evening2";
    await editor.refreshPalette();
    for (const text of ["program", "Evening2", "each time"]) {
      await tapByText(editor, text);
    }
    expect(editor.palette.map((o) => o.token.text)).toContain("the blue-lamp");

    await client.unregisterDevice("lamp-blue");
    await editor.onRegistryChange(); // the app calls this on registry pushes
    const offered = editor.palette.map((o) => o.token.text);
    expect(offered).not.toContain("the blue-lamp");
    expect(offered).toContain("the DomiCube");
    expect(root.querySelector(".editor-notice")?.textContent).toContain("refreshed");
    const domTexts = [...root.querySelectorAll(".palette-option")].map((b) => b.textContent);
    expect(domTexts.join(" ")).not.toContain("the blue-lamp");
  });

  it("rejects activating a draft that violates not-both-empty", async () => {
    const root = document.createElement("div");
    const editor = new EditorController(client, root, () => "Hollow");
    await editor.refreshPalette();
    await tapByText(editor, "program");
    await tapByText(editor, "Hollow");
    const ok = await editor.activate();
    expect(ok).toBe(false);
    expect(root.querySelector(".editor-notice")?.textContent).toMatch(/neither|not activatable/);
  });
});
