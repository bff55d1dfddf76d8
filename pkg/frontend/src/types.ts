// Wire types mirroring the gateway's JSON documents. Field names are the
// gateway's, snake_case included; the console treats them as read-only.

export type Outcome =
  | "Queued"
  | "Running"
  | "Completed"
  | "Blocked"
  | "Failed"
  | "Error";

export const TERMINAL_OUTCOMES: ReadonlySet<string> = new Set([
  "Completed",
  "Blocked",
  "Failed",
  "Error",
]);

export type FieldStatusName = "confirmed" | "invalid" | "unknown";

export interface VetoInfo {
  rule_name: string;
  node_id: string;
  reason: string;
}

export interface SafetyAnnotation {
  kind: string;
  rule: string;
  node?: string;
  field?: string;
  requested?: number;
  applied?: number;
  flag?: string;
  detail?: string;
}

export interface GraphNodeDoc {
  id: string;
  kind: string;
  resource: string;
  bind: Record<string, unknown>;
}

export interface LoopDoc {
  member_ids: string[];
  max_iterations: number;
  condition_node: string;
}

export interface GraphDoc {
  nodes: GraphNodeDoc[];
  loop: LoopDoc | null;
  route: string;
  task_class: string;
  template_name: string | null;
  veto: VetoInfo | null;
  safety_annotations: SafetyAnnotation[];
  failure_policy: string;
}

export interface SafetyFlag {
  kind: string;
  detail: string;
}

export interface ContractDoc {
  task_class: string;
  utterance: string;
  parameters: Record<string, unknown>;
  safety_flags: SafetyFlag[];
  missing_fields: string[];
  provenance: string;
  expected_output: string;
  [extra: string]: unknown;
}

export interface RawIoEntry {
  sent: string;
  received: string | null;
}

export interface RunRecord {
  run_id: string;
  utterance: string;
  outcome: Outcome;
  acknowledged: boolean;
  created_at: number;
  completed_at?: number;
  route?: string;
  route_label?: string;
  summary?: string;
  template?: string | null;
  node_count?: number;
  node_sequence?: string[];
  iterations?: number;
  raw_io?: RawIoEntry[];
  safety_annotations?: SafetyAnnotation[];
  stage_timings_s?: Record<string, number>;
  blocked_by?: VetoInfo;
  error?: string;
  stage_failed?: string;
  session?: string;
}

export interface RunDetail {
  record: RunRecord;
  contract: ContractDoc | null;
  graph: GraphDoc | null;
}

export interface EventDoc {
  event: string;
  node_id: string;
  payload: Record<string, unknown>;
  timestamp: number;
  seq?: number;
}

/** An event paired with its position in the gateway's stream (the SSE id). */
export interface IndexedEvent {
  index: number;
  doc: EventDoc;
}

export interface StateField {
  value: unknown;
  status: FieldStatusName;
}

export interface StateDoc {
  fields: Record<string, StateField>;
  unresolved_failures: string[];
  active_run_id: string | null;
  active_node: string | null;
  data_refs?: unknown[];
}

export interface SubmitReply {
  run_id: string;
  record_url: string;
  events_url: string;
}

export interface BenchmarkCase {
  tag: string;
  utterance: string;
  expected_route_label: string;
  expected_outcome: string;
  scenario: string;
}
