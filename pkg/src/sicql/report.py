"""Run reports: delimited metrics plus rendered figures.

``write_report`` reads one run directory and produces ``metrics.csv``
alongside PNG charts (constraint selectivity, per-operator cost, and
precision/recall where labels exist).
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first

from sicql.observability import ObservabilityStore  # noqa: E402


def write_report(run_root: str | Path, run_id: str, out_dir: str | Path) -> list[Path]:
    store = ObservabilityStore(run_root)
    metrics = store.metrics(run_id)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [_write_csv(metrics, out)]
    written.extend(_write_figures(store, run_id, metrics, out))
    return written


def _write_csv(metrics: dict, out: Path) -> Path:
    path = out / "metrics.csv"
    fields = [
        "constraint_id", "invocations", "selectivity", "precision", "recall",
        "n_labeled", "deterministic", "description",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in metrics["constraints"]:
            writer.writerow({k: row.get(k) for k in fields})
    return path


def _bar(ax, labels: list[str], values: list[float], title: str, ylabel: str) -> None:
    ax.bar(range(len(labels)), values, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax.set_title(title)
    ax.set_ylabel(ylabel)


def _write_figures(store: ObservabilityStore, run_id: str, metrics: dict, out: Path) -> list[Path]:
    written = []

    rows = [c for c in metrics["constraints"] if c["selectivity"] is not None]
    if rows:
        fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(rows)), 3.2))
        _bar(ax, [c["constraint_id"] for c in rows], [c["selectivity"] for c in rows],
             f"constraint selectivity ({run_id})", "first-attempt pass rate")
        ax.set_ylim(0, 1.05)
        fig.tight_layout()
        path = out / "selectivity.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    costs: dict[str, float] = {}
    for rec in store.op_invocations(run_id):
        costs[rec["op_alias"]] = costs.get(rec["op_alias"], 0.0) + rec["cost"]
    if costs:
        fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(costs)), 3.2))
        aliases = sorted(costs)
        _bar(ax, aliases, [costs[a] for a in aliases],
             f"operator invocation cost ({run_id})", "cost units")
        fig.tight_layout()
        path = out / "operator_cost.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    labeled = [c for c in metrics["constraints"] if c["n_labeled"]]
    if labeled:
        fig, ax = plt.subplots(figsize=(max(4, 0.8 * len(labeled)), 3.2))
        xs = range(len(labeled))
        width = 0.38
        ax.bar([x - width / 2 for x in xs],
               [c["precision"] if c["precision"] is not None else 0 for c in labeled],
               width, label="precision", color="#4878a8")
        ax.bar([x + width / 2 for x in xs],
               [c["recall"] if c["recall"] is not None else 0 for c in labeled],
               width, label="recall", color="#a85e48")
        ax.set_xticks(list(xs))
        ax.set_xticklabels([c["constraint_id"] for c in labeled], rotation=45, ha="right", fontsize=7)
        ax.set_ylim(0, 1.05)
        ax.set_title(f"violation detection reliability ({run_id})")
        ax.legend()
        fig.tight_layout()
        path = out / "precision_recall.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
