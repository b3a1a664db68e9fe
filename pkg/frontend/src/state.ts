// Client-side mirror of gateway facts, fed by the event stream.
// Reducers are pure and dedupe by stream_seq; mutations never apply
// optimistically - the UI waits for the gateway's reply or push.

import type { DeviceJson, SnapshotJson, StreamItem, TraceEntryJson } from "./types.js";

export const TRACE_KEEP = 500;

export interface AppState {
  generation: number;
  now: number;
  clockMode: string;
  lastStreamSeq: number;
  devicesStale: boolean;
  devices: DeviceJson[];
  snapshots: Record<string, SnapshotJson>;
  traces: TraceEntryJson[];
}

export function initialState(): AppState {
  return {
    generation: 0,
    now: 0,
    clockMode: "simulated",
    lastStreamSeq: 0,
    devicesStale: true,
    devices: [],
    snapshots: {},
    traces: [],
  };
}

export function applyStreamItem(state: AppState, item: StreamItem): AppState {
  if (item.type !== "hello" && item.stream_seq <= state.lastStreamSeq) {
    return state; // duplicate delivery
  }
  const next: AppState = { ...state, lastStreamSeq: Math.max(state.lastStreamSeq, item.stream_seq) };
  switch (item.type) {
    case "hello": {
      next.generation = item.data.generation as number;
      next.now = item.data.now as number;
      break;
    }
    case "trace": {
      const entry = item.data as unknown as TraceEntryJson;
      next.traces = [...state.traces, entry].slice(-TRACE_KEEP);
      next.now = Math.max(next.now, entry.at);
      break;
    }
    case "registry": {
      next.generation = item.data.generation as number;
      next.devicesStale = true; // device list must be re-fetched, not guessed
      break;
    }
    case "snapshot": {
      const snap = item.data as unknown as SnapshotJson;
      next.snapshots = { ...state.snapshots, [snap.program_id]: snap };
      break;
    }
    case "clock": {
      next.now = item.data.now as number;
      next.clockMode = item.data.mode as string;
      break;
    }
  }
  return next;
}

export function setDevices(state: AppState, devices: DeviceJson[], generation: number): AppState {
  return { ...state, devices, generation, devicesStale: false };
}

export function setSnapshots(state: AppState, snapshots: SnapshotJson[]): AppState {
  const map: Record<string, SnapshotJson> = {};
  for (const snap of snapshots) {
    map[snap.program_id] = snap;
  }
  return { ...state, snapshots: map };
}
