// Typed client for the gateway. The event stream is read with fetch +
// ReadableStream (works in browsers and in node test runs, where
// EventSource does not exist).

import type {
  ApplyReply,
  CatalogJson,
  ClockJson,
  CompletionOptionJson,
  DepGraphJson,
  DeviceJson,
  DraftJson,
  ErrorEnvelope,
  InsertionPointJson,
  OptionsReply,
  ProgramEntryJson,
  SnapshotJson,
  StreamItem,
  TokenJson,
  TraceEntryJson,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly generation: number,
  ) {
    super(message);
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let envelope: ErrorEnvelope | null = null;
  try {
    envelope = (await response.json()) as ErrorEnvelope;
  } catch {
    // non-JSON error body
  }
  if (envelope && envelope.error) {
    throw new ApiError(
      response.status,
      envelope.error.code,
      envelope.error.message,
      envelope.error.generation,
    );
  }
  throw new ApiError(response.status, "http-error", response.statusText, -1);
}

/** Incremental SSE parser; feed chunks, get complete `data:` payloads. */
export class SseParser {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const out: string[] = [];
    let idx: number;
    while ((idx = this.buffer.indexOf("\n\n")) >= 0) {
      const frame = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 2);
      for (const line of frame.split("\n")) {
        if (line.startsWith("data: ")) {
          out.push(line.slice("data: ".length));
        }
      }
    }
    return out;
  }
}

export class HearthClient {
  constructor(readonly base: string = "") {}

  private async get<T>(path: string): Promise<T> {
    return unwrap<T>(await fetch(this.base + path));
  }

  private async send<T>(method: string, path: string, body?: unknown): Promise<T> {
    return unwrap<T>(
      await fetch(this.base + path, {
        method,
        headers: { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      }),
    );
  }

  catalog(): Promise<CatalogJson> {
    return this.get("/api/catalog");
  }

  listDevices(): Promise<{ generation: number; devices: DeviceJson[]; clock: number }> {
    return this.get("/api/devices");
  }

  deviceAction(id: string, action: string, args?: Record<string, unknown>) {
    return this.send<{ generation: number; changes: Record<string, unknown> }>(
      "POST",
      `/api/devices/${encodeURIComponent(id)}/action`,
      { action, args },
    );
  }

  setCritical(id: string, critical: boolean) {
    return this.send("POST", `/api/devices/${encodeURIComponent(id)}/critical`, { critical });
  }

  registerDevice(body: Record<string, unknown>) {
    return this.send("POST", "/api/devices", body);
  }

  unregisterDevice(id: string) {
    return this.send("DELETE", `/api/devices/${encodeURIComponent(id)}`);
  }

  emitEvent(id: string, event: string, payload?: Record<string, unknown>) {
    return this.send("POST", `/api/devices/${encodeURIComponent(id)}/events`, { event, payload });
  }

  listPrograms(): Promise<{ generation: number; programs: ProgramEntryJson[] }> {
    return this.get("/api/programs");
  }

  getProgram(id: string): Promise<ProgramEntryJson & { generation: number }> {
    return this.get(`/api/programs/${encodeURIComponent(id)}`);
  }

  programTokens(id: string): Promise<{ generation: number; tokens: TokenJson[] }> {
    return this.get(`/api/programs/${encodeURIComponent(id)}/tokens`);
  }

  saveProgram(id: string, text: string) {
    return this.send<{ generation: number; program_id: string; changed: boolean }>(
      "PUT",
      `/api/programs/${encodeURIComponent(id)}`,
      { text },
    );
  }

  deleteProgram(id: string) {
    return this.send("DELETE", `/api/programs/${encodeURIComponent(id)}`);
  }

  startProgram(id: string) {
    return this.send<{ generation: number; snapshot: SnapshotJson }>(
      "POST",
      `/api/programs/${encodeURIComponent(id)}/start`,
    );
  }

  stopProgram(id: string) {
    return this.send<{ generation: number; snapshot: SnapshotJson }>(
      "POST",
      `/api/programs/${encodeURIComponent(id)}/stop`,
    );
  }

  programSnapshot(id: string): Promise<{ generation: number; snapshot: SnapshotJson }> {
    return this.get(`/api/programs/${encodeURIComponent(id)}/snapshot`);
  }

  completionOptions(draft: DraftJson, point?: InsertionPointJson): Promise<OptionsReply> {
    return this.send("POST", "/api/completion/options", { draft, point: point ?? null });
  }

  completionApply(
    draft: DraftJson,
    point: InsertionPointJson,
    option: CompletionOptionJson,
    text?: string,
  ): Promise<ApplyReply> {
    return this.send("POST", "/api/completion/apply", { draft, point, option, text });
  }

  completionDelete(draft: DraftJson, point: InsertionPointJson): Promise<ApplyReply> {
    return this.send("POST", "/api/completion/delete", { draft, point });
  }

  traces(params: Record<string, string | number> = {}): Promise<{
    generation: number;
    entries: TraceEntryJson[];
    next_cursor: number | null;
  }> {
    const qs = new URLSearchParams(
      Object.fromEntries(Object.entries(params).map(([k, v]) => [k, String(v)])),
    ).toString();
    return this.get(`/api/traces${qs ? "?" + qs : ""}`);
  }

  depgraph(annotated = true): Promise<{ generation: number; graph: DepGraphJson }> {
    return this.get(`/api/depgraph?annotated=${annotated}`);
  }

  clock(): Promise<ClockJson & { generation: number }> {
    return this.get("/api/clock");
  }

  setClock(body: { mode?: string; factor?: number; advance_to?: number }) {
    return this.send<ClockJson & { generation: number }>("POST", "/api/clock", body);
  }

  /**
   * Subscribe to the server push stream; resolves when the stream closes.
   * Abort via the signal to detach.
   */
  async streamEvents(onItem: (item: StreamItem) => void, signal?: AbortSignal): Promise<void> {
    const response = await fetch(this.base + "/api/events", { signal });
    if (!response.ok || response.body === null) {
      throw new ApiError(response.status, "stream-failed", response.statusText, -1);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    for (;;) {
      const { value, done } = await reader.read();
      if (done) {
        return;
      }
      for (const payload of parser.push(decoder.decode(value, { stream: true }))) {
        onItem(JSON.parse(payload) as StreamItem);
      }
    }
  }
}
