// Wire shapes as the service sends them. Optional/nullable exactly where the
// service may omit or null a field; the UI never invents values beyond these.

export type Freshness = "fresh" | "stale" | "unknown";
export type RangeState = "in_range" | "below_min" | "above_max";

export interface ResolvedRow {
  kind: string;
  unit: string;
  purpose: string;
  min: number | null;
  max: number | null;
  freshness: Freshness;
  value: number | null;
  timestamp: number | null;
  origin: string | null;
  range: RangeState | null;
  age_ms: number | null;
}

export interface DosagePayload {
  rule_id: string;
  drug: string;
  dose: number;
  unit: string;
  branch: string | null;
  inputs: Record<string, unknown>;
}

export interface ViewPayload {
  graph_id: string;
  node_id: string;
  node_kind: string;
  text: string;
  resolved: ResolvedRow[];
  choices: string[];
  terminal: boolean;
  pending_auto: Record<string, any> | null;
  dosage: DosagePayload | null;
  dosage_error: string | null;
}

export interface AlarmPayload {
  id: string;
  raised_at: number;
  state: "open" | "accepted" | "dismissed";
  kind: string;
  value: number;
  breach: "below_min" | "above_max";
  threshold: { min: number | null; max: number | null };
  session_id: string | null;
  node_id: string | null;
  [extra: string]: any;
}

export interface StreamEvent {
  event: "view" | "vitals" | "alarm" | "alarm_resolved" | "gap";
  stream_seq?: number;
  session_id?: string;
  view?: ViewPayload;
  alarm?: AlarmPayload;
  [extra: string]: any;
}
