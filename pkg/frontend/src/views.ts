// HTML renderers: pure functions from API payloads to markup strings.
// Interactive elements carry data-action attributes handled in app.ts.

import { escapeHtml, percent, reliabilitySummary, statusBadge, truncate, units } from "./format.js";
import type { LabelingState } from "./labeling.js";
import type {
  ConstraintMetrics,
  LineageNode,
  ResultRow,
  RunMetrics,
  RunRecord,
  RunSummary,
} from "./types.js";

export function renderRunsPage(runs: RunSummary[]): string {
  if (runs.length === 0) {
    return `<section><h2>Runs</h2><p class="empty">No runs recorded yet. Execute a query first.</p></section>`;
  }
  const rows = runs
    .map(
      (run) => `
      <tr>
        <td><a href="#" data-action="open-run" data-run="${escapeHtml(run.run_id)}">${escapeHtml(run.run_id)}</a></td>
        <td>${statusBadge(run.status)}</td>
        <td class="num">${units(run.totals.cost_units)}</td>
        <td class="num">${reliabilitySummary(run.totals.operator_reliability)}</td>
        <td class="num">${run.totals.tuples_in ?? "—"} → ${run.totals.tuples_out ?? "—"}</td>
        <td class="num">${run.totals.flagged ?? 0}</td>
      </tr>`,
    )
    .join("");
  return `
    <section>
      <h2>Runs</h2>
      <table>
        <thead><tr><th>run</th><th>status</th><th>cost</th><th>min op reliability</th><th>tuples</th><th>flagged</th></tr></thead>
        <tbody>${rows}</tbody>
      </table>
    </section>`;
}

export function renderMetricsPanel(metrics: RunMetrics): string {
  const rows = metrics.constraints
    .map((c) => renderConstraintRow(c))
    .join("");
  return `
    <section id="metrics-panel">
      <h3>Constraint metrics</h3>
      <table>
        <thead><tr><th>constraint</th><th>kind</th><th>checks</th><th>selectivity</th><th>precision</th><th>recall</th><th>labeled</th></tr></thead>
        <tbody>${rows}</tbody>
      </table>
    </section>`;
}

function renderConstraintRow(c: ConstraintMetrics): string {
  const kind = c.deterministic ? "deterministic" : "stochastic";
  return `
    <tr data-constraint="${escapeHtml(c.constraint_id)}">
      <td title="${escapeHtml(c.description)}">${escapeHtml(c.constraint_id)}</td>
      <td>${kind}</td>
      <td class="num">${c.invocations}</td>
      <td class="num">${percent(c.selectivity)}</td>
      <td class="num" data-field="precision">${percent(c.precision)}</td>
      <td class="num" data-field="recall">${percent(c.recall)}</td>
      <td class="num">${c.n_labeled}</td>
    </tr>`;
}

export function renderRunDetail(record: RunRecord, metrics: RunMetrics): string {
  const stages = record.stage_stats
    .map(
      (s) => `
      <tr><td>${s.index}</td><td>${escapeHtml(s.alias)}</td><td>${escapeHtml(s.kind)}</td>
      <td class="num">${s.in}</td><td class="num">${s.out}</td><td class="num">${s.ignored}</td>
      <td class="num">${s.filtered}</td></tr>`,
    )
    .join("");
  return `
    <section>
      <p><a href="#" data-action="home">← runs</a></p>
      <h2>${escapeHtml(record.run_id)} ${statusBadge(record.status)}</h2>
      <p class="totals">cost ${units(record.totals.cost_units)} · retries ${record.totals.retries ?? 0}
         · flagged ${record.totals.flagged ?? 0}</p>
      <div class="actions">
        <button data-action="show-tuples" data-run="${escapeHtml(record.run_id)}">tuples</button>
        <button data-action="show-flagged" data-run="${escapeHtml(record.run_id)}">flagged only</button>
        <button data-action="start-labeling" data-run="${escapeHtml(record.run_id)}">label constraints</button>
      </div>
      ${renderMetricsPanel(metrics)}
      <details><summary>per-stage accounting</summary>
        <table><thead><tr><th>#</th><th>alias</th><th>kind</th><th>in</th><th>out</th><th>ignored</th><th>filtered</th></tr></thead>
        <tbody>${stages}</tbody></table>
      </details>
      <details><summary>physical plan</summary><pre>${escapeHtml(record.physical_plan)}</pre></details>
      <div id="drilldown"></div>
    </section>`;
}

export function renderTuples(rows: ResultRow[], flaggedOnly: boolean): string {
  if (rows.length === 0) {
    return `<section id="tuples"><h3>Tuples</h3><p class="empty">No ${flaggedOnly ? "flagged " : ""}tuples.</p></section>`;
  }
  const attrs = Object.keys(rows[0]).filter((k) => !k.startsWith("_"));
  const header = attrs.map((a) => `<th>${escapeHtml(a)}</th>`).join("");
  const body = rows
    .map((row) => {
      const flag = row._flags.length
        ? `<span class="flag" title="${escapeHtml(row._flags.join(", "))}">⚑ ${escapeHtml(row._flags.join(", "))}</span>`
        : "";
      const cells = attrs
        .map((a) => `<td>${escapeHtml(truncate(String(row[a] ?? "")))}</td>`)
        .join("");
      return `
        <tr>
          <td><a href="#" data-action="lineage" data-tuple="${escapeHtml(row._tuple_id)}">${escapeHtml(row._tuple_id)}</a> ${flag}</td>
          ${cells}
        </tr>`;
    })
    .join("");
  return `
    <section id="tuples">
      <h3>Tuples${flaggedOnly ? " (flagged)" : ""}</h3>
      <table><thead><tr><th>tuple</th>${header}</tr></thead><tbody>${body}</tbody></table>
      <div id="lineage"></div>
    </section>`;
}

export function renderLineageTree(node: LineageNode): string {
  const label = node.op_alias
    ? `${escapeHtml(node.tuple_id)} <span class="op">via ${escapeHtml(node.op_alias)}</span>`
    : escapeHtml(node.tuple_id);
  if (node.parents.length === 0) {
    return `<li>${label} <span class="op">(scanned)</span></li>`;
  }
  const children = node.parents.map((p) => renderLineageTree(p)).join("");
  return `<li>${label}<ul>${children}</ul></li>`;
}

export function renderLineagePanel(root: LineageNode): string {
  return `<section id="lineage-panel"><h4>Lineage of ${escapeHtml(root.tuple_id)}</h4><ul class="tree">${renderLineageTree(root)}</ul></section>`;
}

export function renderLabeling(state: LabelingState): string {
  if (state.done) {
    return `
      <section id="labeling">
        <h3>Labeling</h3>
        <p class="done">Queue complete: ${state.labeled} record(s) labeled.</p>
        ${state.notice ? `<p class="notice">${escapeHtml(state.notice)}</p>` : ""}
        <button data-action="labeling-finished">show refreshed metrics</button>
      </section>`;
  }
  const task = state.task!;
  const predicted = state.revealed
    ? `<p>detector predicted: <strong>${escapeHtml(task.predicted_label)}</strong>
       (confidence ${percent(task.confidence)})</p>`
    : `<button data-action="reveal-predicted">reveal detector prediction</button>`;
  return `
    <section id="labeling">
      <h3>Labeling <span class="remaining">(${state.remaining} open)</span></h3>
      ${state.notice ? `<p class="notice">${escapeHtml(state.notice)}</p>` : ""}
      <p class="constraint-desc">${escapeHtml(task.description)}</p>
      <dl>
        <dt>constraint</dt><dd>${escapeHtml(task.constraint_id)} @ ${escapeHtml(task.op_alias)}</dd>
        <dt>checked value</dt><dd><pre>${escapeHtml(task.input.value.text ?? "(null)")}</pre></dd>
        <dt>operator input</dt><dd><pre>${escapeHtml(task.input.source.text ?? "(null)")}</pre></dd>
      </dl>
      <div class="judgement">
        <span>Do the inputs satisfy the constraint?</span>
        <button data-action="label-satisfied">satisfied</button>
        <button data-action="label-violated">violated</button>
      </div>
      ${predicted}
    </section>`;
}
