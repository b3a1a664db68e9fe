// Rendering is a pure function of gateway facts: same stub in, same DOM out.

import { describe, expect, it } from "vitest";

import {
  depGraphSvg,
  deviceCard,
  formatSimTime,
  paletteButton,
  programCard,
  statusGlyph,
  timelineLanes,
  tokenStrip,
} from "../src/render.js";
import {
  BLUE_LAMP,
  CATALOG,
  DEGRADED_SNAPSHOT,
  FRIDGE_PLUG,
  GRAPH,
  MISSING_LAMP,
  RUNNING_SNAPSHOT,
  STOPPED_SNAPSHOT,
  TRACES,
} from "./stubs.js";

describe("status glyphs", () => {
  it("maps running to a green triangle", () => {
    const glyph = statusGlyph("running");
    expect(glyph.textContent).toBe("▶");
    expect(glyph.className).toContain("glyph-running");
  });
  it("maps degraded to an orange triangle and stopped to a square", () => {
    expect(statusGlyph("degraded").className).toContain("glyph-degraded");
    expect(statusGlyph("degraded").textContent).toBe("▶");
    expect(statusGlyph("stopped").textContent).toBe("■");
  });
});

describe("device cards", () => {
  it("shows state, kind, location and action buttons from the catalog", () => {
    const card = deviceCard(BLUE_LAMP, CATALOG);
    expect(card.querySelector(".device-name")?.textContent).toBe("blue-lamp");
    expect(card.querySelector(".device-location")?.textContent).toBe("bedroom");
    const actions = [...card.querySelectorAll(".device-action")].map((b) => b.textContent);
    expect(actions).toEqual(["switch on", "switch off", "blink", "set color of"]);
    expect(card.textContent).toContain("power");
    expect(card.textContent).toContain("off");
  });

  it("marks critical devices with a badge", () => {
    const card = deviceCard(FRIDGE_PLUG, CATALOG);
    expect(card.querySelector(".critical-badge")).toBeTruthy();
  });

  it("grays missing devices and disables their actions", () => {
    const card = deviceCard(MISSING_LAMP, CATALOG);
    expect(card.className).toContain("availability-missing");
    expect(card.querySelector(".missing-badge")).toBeTruthy();
    const buttons = [...card.querySelectorAll<HTMLButtonElement>(".device-action")];
    expect(buttons.every((b) => b.disabled)).toBe(true);
  });

  it("is deterministic for a given snapshot", () => {
    expect(deviceCard(BLUE_LAMP, CATALOG).outerHTML).toBe(deviceCard(BLUE_LAMP, CATALOG).outerHTML);
  });
});

describe("program cards", () => {
  it("shows counters and waiting points for a running program", () => {
    const card = programCard(RUNNING_SNAPSHOT);
    expect(card.querySelector(".glyph")?.getAttribute("data-status")).toBe("running");
    expect(card.textContent).toContain("imperative[0]=1");
    expect(card.textContent).toContain("#0=0");
    expect(card.querySelector(".waiting-points")?.textContent).toContain("#0");
    expect(card.querySelector<HTMLButtonElement>(".program-start")?.disabled).toBe(true);
    expect(card.querySelector<HTMLButtonElement>(".program-stop")?.disabled).toBe(false);
  });

  it("lists unknown references on degraded programs", () => {
    const card = programCard(DEGRADED_SNAPSHOT);
    expect(card.querySelector(".unknown-refs")?.textContent).toContain("imperative[1].selector");
    expect(card.querySelector(".glyph")?.className).toContain("glyph-degraded");
  });

  it("enables start only when stopped", () => {
    const card = programCard(STOPPED_SNAPSHOT);
    expect(card.querySelector<HTMLButtonElement>(".program-start")?.disabled).toBe(false);
    expect(card.querySelector<HTMLButtonElement>(".program-stop")?.disabled).toBe(true);
  });
});

describe("token strip and palette", () => {
  it("renders tokens with category classes and an active hole", () => {
    const strip = tokenStrip([
      { text: "program", category: "keyword", terminal_key: "kw:program", value: "program" },
      { text: "Evening", category: "program", terminal_key: "class:name", value: "Evening" },
    ]);
    const tokens = [...strip.querySelectorAll(".token")];
    expect(tokens.map((t) => t.textContent)).toEqual(["program", "Evening"]);
    expect(tokens[0].className).toContain("token-keyword");
    expect(strip.querySelector(".hole-active")).toBeTruthy();
  });

  it("flags unknown device tokens as warnings", () => {
    const strip = tokenStrip([
      {
        text: "the Unknown(lamp-x)",
        category: "device",
        terminal_key: "dev:lamp-x",
        value: "lamp-x",
        unknown: true,
      },
    ]);
    expect(strip.querySelector(".token-unknown")).toBeTruthy();
  });

  it("grays state-filtered options instead of hiding them", () => {
    const btn = paletteButton({
      token: { text: "the blue-lamp", category: "device", terminal_key: "dev:lamp-blue", value: "lamp-blue" },
      category: "device",
      free_text: false,
      availability: "state-filtered-out",
      edit: "",
      generation: 4,
      domain_hint: null,
    });
    expect(btn.className).toContain("state-filtered");
    expect(btn.disabled).toBe(false);
  });
});

describe("timeline", () => {
  it("renders one lane per subject with positioned dots", () => {
    const lanes = timelineLanes(TRACES);
    const subjects = [...lanes.querySelectorAll(".timeline-lane")].map((l) =>
      l.getAttribute("data-subject"),
    );
    expect(subjects).toEqual(["lamp-blue", "door", "Guard", "plug-fridge"]);
    const denial = lanes.querySelector(".lane-dot.cat-denial") as HTMLElement;
    expect(denial).toBeTruthy();
    expect(parseFloat(denial.style.left)).toBeCloseTo(100, 1);
  });
});

describe("dependency graph", () => {
  it("draws conflict edges in red converging on the shared lamp", () => {
    const svg = depGraphSvg(GRAPH);
    const conflictEdges = svg.querySelectorAll(".edge-conflict");
    expect(conflictEdges.length).toBe(2); // both writers converge
    const lamp = svg.querySelector('[data-device="lamp-old"]');
    expect(lamp?.getAttribute("class")).toContain("gconflict");
  });

  it("shows a triangle for the running program and a square for the stopped one", () => {
    const svg = depGraphSvg(GRAPH);
    const running = svg.querySelector('[data-program="ShowTemperature"]');
    const stopped = svg.querySelector('[data-program="MakeEnergyVisible"]');
    expect(running?.querySelector("polygon")).toBeTruthy();
    expect(stopped?.querySelector("rect")).toBeTruthy();
  });
});

describe("clock formatting", () => {
  it("renders simulated milliseconds as day-aware wall text", () => {
    expect(formatSimTime(0)).toBe("00:00:00");
    expect(formatSimTime(83_100_000)).toBe("23:05:00");
    expect(formatSimTime(90_000_000)).toBe("day 1 01:00:00");
  });
});
