import { describe, expect, it } from "vitest";

import { SseParser } from "../src/api.js";
import { applyStreamItem, initialState, setDevices } from "../src/state.js";
import type { StreamItem } from "../src/types.js";
import { BLUE_LAMP, RUNNING_SNAPSHOT } from "./stubs.js";

function item(seq: number, type: StreamItem["type"], data: Record<string, unknown>): StreamItem {
  return { stream_seq: seq, type, data };
}

describe("stream reducer", () => {
  it("applies hello, traces, registry and snapshot items", () => {
    let state = initialState();
    state = applyStreamItem(state, item(0, "hello", { generation: 4, now: 1000 }));
    expect(state.generation).toBe(4);
    expect(state.now).toBe(1000);

    state = applyStreamItem(
      state,
      item(1, "trace", { seq: 9, at: 2000, category: "action", subject: "lamp", details: {}, cause: "p" }),
    );
    expect(state.traces.length).toBe(1);
    expect(state.now).toBe(2000);

    state = setDevices(state, [BLUE_LAMP], 5);
    expect(state.devicesStale).toBe(false);
    state = applyStreamItem(state, item(2, "registry", { generation: 6, change: "unregistered", device_id: "x" }));
    expect(state.generation).toBe(6);
    expect(state.devicesStale).toBe(true); // the list must be re-fetched

    state = applyStreamItem(state, item(3, "snapshot", RUNNING_SNAPSHOT as unknown as Record<string, unknown>));
    expect(state.snapshots["XmasTree"].status).toBe("running");
  });

  it("dedupes items by stream_seq (at-least-once delivery)", () => {
    let state = initialState();
    const trace = item(5, "trace", { seq: 1, at: 10, category: "action", subject: "a", details: {}, cause: "p" });
    state = applyStreamItem(state, trace);
    const again = applyStreamItem(state, trace);
    expect(again).toBe(state);
    expect(again.traces.length).toBe(1);
  });

  it("never mutates the previous state", () => {
    const state = initialState();
    const next = applyStreamItem(
      state,
      item(1, "trace", { seq: 0, at: 0, category: "action", subject: "a", details: {}, cause: "p" }),
    );
    expect(state.traces.length).toBe(0);
    expect(next.traces.length).toBe(1);
  });
});

describe("sse parser", () => {
  it("reassembles frames across chunk boundaries", () => {
    const parser = new SseParser();
    expect(parser.push('data: {"a"')).toEqual([]);
    expect(parser.push(': 1}\n\ndata: {"b": 2}\n\n: keepalive\n\n')).toEqual([
      '{"a": 1}',
      '{"b": 2}',
    ]);
    expect(parser.push("data: tail")).toEqual([]);
    expect(parser.push("\n\n")).toEqual(["tail"]);
  });
});
