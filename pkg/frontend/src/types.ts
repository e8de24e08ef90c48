// Payload types mirroring the engine's HTTP API. Rendered values come only
// from these responses; the client computes no metrics of its own.

export interface RunSummary {
  run_id: string;
  status: string;
  started_at: string | null;
  totals: RunTotals;
}

export interface RunTotals {
  cost_units?: number;
  tuples_in?: number;
  tuples_out?: number;
  flagged?: number;
  retries?: number;
  operator_reliability?: Record<string, number>;
}

export interface RunRecord extends RunSummary {
  query: string;
  logical_plan: string;
  physical_plan: string;
  stage_stats: StageStats[];
  finished_at: string | null;
}

export interface StageStats {
  index: number;
  alias: string;
  kind: string;
  in: number;
  out: number;
  ignored: number;
  filtered: number;
  discarded: number;
}

export interface ConstraintMetrics {
  constraint_id: string;
  invocations: number;
  selectivity: number | null;
  precision: number | null;
  recall: number | null;
  n_labeled: number;
  deterministic: boolean;
  description: string;
}

export interface RunMetrics {
  run_id: string;
  status: string;
  totals: RunTotals;
  operator_reliability: Record<string, number>;
  constraints: ConstraintMetrics[];
}

export interface ResultRow {
  _tuple_id: string;
  _flags: string[];
  _parents: string[];
  [attr: string]: unknown;
}

export interface LineageNode {
  tuple_id: string;
  op_alias?: string;
  parents: LineageNode[];
}

export interface Snapshot {
  text: string | null;
  truncated: boolean;
  sha256: string | null;
}

export interface LabelTask {
  invocation_id: string;
  constraint_id: string;
  op_alias: string;
  tuple_id: string;
  attempt: number;
  predicted_label: "pass" | "violation";
  confidence: number;
  description: string;
  input: { value: Snapshot; source: Snapshot };
}

export interface NextLabelResponse {
  task: LabelTask | null;
  remaining: number;
}

export interface ApiError {
  code: string;
  message: string;
}
