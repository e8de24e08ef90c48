// Pure display helpers shared by the views.

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function percent(value: number | null | undefined): string {
  if (value === null || value === undefined) {
    return "—";
  }
  return `${(value * 100).toFixed(1)}%`;
}

export function units(value: number | undefined): string {
  if (value === undefined) {
    return "—";
  }
  return value.toFixed(value >= 100 ? 0 : 2);
}

export function statusBadge(status: string): string {
  const cls = status === "completed" ? "ok" : status === "aborted" ? "bad" : "warn";
  return `<span class="badge ${cls}">${escapeHtml(status)}</span>`;
}

// Reliability of an operator = product of post-retry adherence across its
// constraints; shown per run as the planner's estimate.
export function reliabilitySummary(reliability: Record<string, number> | undefined): string {
  if (!reliability || Object.keys(reliability).length === 0) {
    return "—";
  }
  const worst = Math.min(...Object.values(reliability));
  return percent(worst);
}

export function truncate(text: string, limit = 240): string {
  return text.length > limit ? `${text.slice(0, limit)}…` : text;
}
