// Thin typed client over the engine's HTTP API.

import type {
  LineageNode,
  NextLabelResponse,
  ResultRow,
  RunMetrics,
  RunRecord,
  RunSummary,
} from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, init);
  if (!response.ok) {
    let code = "error";
    let message = `HTTP ${response.status}`;
    try {
      const body = await response.json();
      code = body.code ?? code;
      message = body.message ?? message;
    } catch {
      // non-JSON error body; keep the status message
    }
    throw new ApiRequestError(response.status, code, message);
  }
  return (await response.json()) as T;
}

export const listRuns = (): Promise<RunSummary[]> => request("/runs");

export const getRun = (runId: string): Promise<RunRecord> =>
  request(`/runs/${encodeURIComponent(runId)}`);

export const getMetrics = (runId: string): Promise<RunMetrics> =>
  request(`/runs/${encodeURIComponent(runId)}/metrics`);

export const getTuples = (runId: string, flagged?: boolean): Promise<ResultRow[]> => {
  const query = flagged === undefined ? "" : `?flagged=${flagged}`;
  return request(`/runs/${encodeURIComponent(runId)}/tuples${query}`);
};

export const getLineage = (tupleId: string, runId: string): Promise<LineageNode> =>
  request(`/tuples/${encodeURIComponent(tupleId)}/lineage?run=${encodeURIComponent(runId)}`);

export const nextLabelTask = (
  runId: string,
  constraintId?: string,
): Promise<NextLabelResponse> => {
  const constraint = constraintId ? `&constraint=${encodeURIComponent(constraintId)}` : "";
  return request(`/labels/next?run=${encodeURIComponent(runId)}${constraint}`);
};

export const submitLabel = (invocationId: string, trueLabel: boolean): Promise<{ ok: boolean }> =>
  request("/labels", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ invocation_id: invocationId, true_label: trueLabel }),
  });
