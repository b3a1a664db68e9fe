// Wire types for the gateway API. The UI computes nothing itself: every
// displayed fact arrives in one of these shapes.

export interface TokenJson {
  text: string;
  category: string;
  terminal_key: string;
  value: unknown;
  path?: string;
  unknown?: boolean;
}

export interface DraftJson {
  tokens: TokenJson[];
}

export interface InsertionPointJson {
  token_index: number;
  context: string[];
}

export interface CompletionOptionJson {
  token: TokenJson;
  category: string;
  free_text: boolean;
  availability: "available" | "state-filtered-out";
  edit: string;
  generation: number;
  domain_hint: string | null;
}

export interface OptionsReply {
  generation: number;
  point: InsertionPointJson;
  options: CompletionOptionJson[];
}

export interface ApplyReply {
  generation: number;
  draft: DraftJson;
  point: InsertionPointJson;
}

export interface DeviceJson {
  id: string;
  kind: string;
  display_name: string;
  location: string;
  properties: Record<string, string>;
  critical: boolean;
  availability: "available" | "missing";
  state: Record<string, unknown>;
}

export interface SnapshotJson {
  program_id: string;
  name: string;
  status: "running" | "degraded" | "stopped";
  stmt_counters: Record<string, number>;
  rule_counters: Record<string, number>;
  waiting_points: number[];
  unknown_refs: string[];
  at: number;
}

export interface ProgramEntryJson {
  program_id: string;
  name: string;
  text: string;
  snapshot: SnapshotJson;
  validation?: {
    unknown_refs: { path: string; device_id: string }[];
    type_errors: string[];
    errors: string[];
  };
}

export interface TraceEntryJson {
  seq: number;
  at: number;
  category: string;
  subject: string;
  details: Record<string, unknown>;
  cause: string;
}

export interface DepGraphJson {
  generation: number;
  annotated: boolean;
  programs: { program_id: string; name: string; status: string | null }[];
  devices: { device_id: string; display_name: string; availability: string }[];
  edges: { kind: string; src: string; dst: string; via: string[]; detail: string }[];
  conflicts: { device_id: string; writers: string[]; activity: string | null }[];
}

export interface ClockJson {
  now: number;
  mode: string;
  factor: number;
}

export interface CatalogJson {
  generation: number;
  kinds: Record<
    string,
    {
      vars: Record<string, { type: string; options?: string[] }>;
      actions: Record<
        string,
        {
          display: string;
          param: { name: string; domain: { type: string; options?: string[] } } | null;
          power_removing: boolean;
        }
      >;
      events: Record<string, { display: string; trigger_param: string | null }>;
    }
  >;
}

export interface StreamItem {
  stream_seq: number;
  type: "hello" | "trace" | "registry" | "snapshot" | "clock";
  data: Record<string, unknown>;
}

export interface ErrorEnvelope {
  error: { code: string; message: string; generation: number };
}
