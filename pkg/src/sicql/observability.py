"""Run, invocation, and lineage records as append-only JSONL relations.

Each run gets its own directory::

    runs/<run_id>/{run.json, op_invocations.jsonl,
                   constraint_invocations.jsonl, lineage.jsonl,
                   results.jsonl, labels.jsonl}

``labels.jsonl`` holds write-once true labels so the invocation relation
itself stays immutable and diffable; readers join the two. Timestamps are
UTC ISO-8601. One writer per run with an internal lock accepts concurrent
producers; invocation ids are monotone per run and globally unique
(``<run_id>:<n>``).
"""

from __future__ import annotations

import datetime as dt
import json
import threading
from pathlib import Path

from sicql.errors import LabelConflictError, ObservabilityError

SNAPSHOT_LIMIT = 4096  # bytes of checked text kept inline; full text is hashed

RUN_FILES = (
    "run.json",
    "op_invocations.jsonl",
    "constraint_invocations.jsonl",
    "lineage.jsonl",
    "results.jsonl",
)


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat()


def _snapshot(text: str | None) -> dict:
    import hashlib

    if text is None:
        return {"text": None, "truncated": False, "sha256": None}
    raw = str(text)
    data = raw.encode("utf-8")
    truncated = len(data) > SNAPSHOT_LIMIT
    shown = data[:SNAPSHOT_LIMIT].decode("utf-8", errors="ignore") if truncated else raw
    return {
        "text": shown,
        "truncated": truncated,
        "sha256": hashlib.sha256(data).hexdigest(),
    }


class RunWriter:
    """Appends records for one run; safe for concurrent producers."""

    def __init__(self, root: str | Path, run_id: str, query_text: str = "", seed: int = 0):
        self.run_id = run_id
        self.dir = Path(root) / run_id
        self.dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._counter = 0
        self._files = {
            name: open(self.dir / name, "a", encoding="utf-8")  # noqa: SIM115 - closed in finalize
            for name in RUN_FILES
            if name.endswith(".jsonl")
        }
        self._run_record = {
            "run_id": run_id,
            "query": query_text,
            "seed": seed,
            "status": "running",
            "started_at": _now(),
            "finished_at": None,
            "logical_plan": "",
            "physical_plan": "",
            "totals": {},
            "stage_stats": [],
        }
        self._write_run_record()

    def _write_run_record(self) -> None:
        with open(self.dir / "run.json", "w", encoding="utf-8") as fh:
            json.dump(self._run_record, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def set_plans(self, logical: str, physical: str) -> None:
        self._run_record["logical_plan"] = logical
        self._run_record["physical_plan"] = physical

    def _next_id(self) -> str:
        self._counter += 1
        return f"{self.run_id}:{self._counter:06d}"

    def _append(self, name: str, record: dict) -> None:
        fh = self._files[name]
        fh.write(json.dumps(record, sort_keys=True) + "\n")
        fh.flush()

    def record_op_invocation(
        self, op_alias: str, tuple_id: str, attempt: int, prompt: str, output: str, cost: float
    ) -> str:
        with self._lock:
            inv_id = self._next_id()
            self._append(
                "op_invocations.jsonl",
                {
                    "invocation_id": inv_id,
                    "run_id": self.run_id,
                    "op_alias": op_alias,
                    "tuple_id": tuple_id,
                    "attempt": attempt,
                    "prompt": _snapshot(prompt),
                    "output": _snapshot(output),
                    "cost": cost,
                    "ts": _now(),
                },
            )
            return inv_id

    def record_constraint_invocation(
        self,
        constraint_id: str,
        op_alias: str,
        tuple_id: str,
        attempt: int,
        checked_value,
        source_excerpt,
        predicted_label: str,
        confidence: float,
        mechanism: str,
        mode: str,
        description: str,
        cost: float = 0.0,
    ) -> str:
        with self._lock:
            inv_id = self._next_id()
            self._append(
                "constraint_invocations.jsonl",
                {
                    "invocation_id": inv_id,
                    "run_id": self.run_id,
                    "constraint_id": constraint_id,
                    "op_alias": op_alias,
                    "tuple_id": tuple_id,
                    "attempt": attempt,
                    "input": {
                        "value": _snapshot(None if checked_value is None else str(checked_value)),
                        "source": _snapshot(None if source_excerpt is None else str(source_excerpt)),
                    },
                    "predicted_label": predicted_label,
                    "confidence": confidence,
                    "true_label": None,
                    "impl": {"mechanism": mechanism, "mode": mode},
                    "description": description,
                    "cost": cost,
                    "ts": _now(),
                },
            )
            return inv_id

    def record_lineage(self, child: str, parent: str, op_alias: str) -> None:
        with self._lock:
            self._append(
                "lineage.jsonl",
                {"child": child, "parent": parent, "op_alias": op_alias},
            )

    def record_stage_stats(
        self,
        index: int,
        alias: str,
        kind: str,
        tuples_in: int,
        tuples_out: int,
        ignored: int = 0,
        filtered: int = 0,
        discarded: int = 0,
    ) -> None:
        with self._lock:
            self._run_record["stage_stats"].append(
                {
                    "index": index,
                    "alias": alias,
                    "kind": kind,
                    "in": tuples_in,
                    "out": tuples_out,
                    "ignored": ignored,
                    "filtered": filtered,
                    "discarded": discarded,
                }
            )

    def write_result_row(self, row: dict) -> None:
        with self._lock:
            fh = self._files["results.jsonl"]
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    def finalize(self, status: str, totals: dict) -> None:
        with self._lock:
            self._run_record["status"] = status
            self._run_record["totals"] = totals
            self._run_record["finished_at"] = _now()
            self._write_run_record()
            for fh in self._files.values():
                fh.flush()
                fh.close()
            self._files = {}


class ObservabilityStore:
    """Read side: metrics, labeling, lineage over stored run directories."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    # -- raw relations -------------------------------------------------------

    def run_ids(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / "run.json").exists())

    def run_record(self, run_id: str) -> dict:
        path = self.root / run_id / "run.json"
        if not path.exists():
            raise ObservabilityError(f"unknown run '{run_id}'")
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def _read_jsonl(self, run_id: str, name: str) -> list[dict]:
        path = self.root / run_id / name
        if not path.exists():
            return []
        out = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out

    def labels(self, run_id: str) -> dict[str, bool]:
        return {
            rec["invocation_id"]: rec["true_label"]
            for rec in self._read_jsonl(run_id, "labels.jsonl")
        }

    def constraint_invocations(self, run_id: str) -> list[dict]:
        """Invocation records with true labels joined in."""
        labels = self.labels(run_id)
        records = self._read_jsonl(run_id, "constraint_invocations.jsonl")
        for rec in records:
            rec["true_label"] = labels.get(rec["invocation_id"])
        return records

    def op_invocations(self, run_id: str) -> list[dict]:
        return self._read_jsonl(run_id, "op_invocations.jsonl")

    def lineage_records(self, run_id: str) -> list[dict]:
        return self._read_jsonl(run_id, "lineage.jsonl")

    def results(self, run_id: str) -> list[dict]:
        return self._read_jsonl(run_id, "results.jsonl")

    # -- metrics ---------------------------------------------------------------

    def compute_selectivity(self, run_id: str, constraint_id: str) -> float:
        """First-attempt pass fraction, so retries do not bias the estimate."""
        first = [
            rec
            for rec in self.constraint_invocations(run_id)
            if rec["constraint_id"] == constraint_id and rec["attempt"] == 0
        ]
        if not first:
            raise ObservabilityError(
                f"no data: constraint '{constraint_id}' has no recorded invocations in run '{run_id}'"
            )
        passes = sum(1 for rec in first if rec["predicted_label"] == "pass")
        return passes / len(first)

    def compute_precision_recall(
        self, run_id: str, constraint_id: str
    ) -> tuple[float | None, float | None, int]:
        """Precision/recall of violation detection against human labels.

        ``true_label`` is True when the constraint was genuinely violated
        (the positive class). Zero-denominator metrics are None, not 0.
        """
        labeled = [
            rec
            for rec in self.constraint_invocations(run_id)
            if rec["constraint_id"] == constraint_id and rec["true_label"] is not None
        ]
        tp = sum(1 for r in labeled if r["predicted_label"] == "violation" and r["true_label"])
        fp = sum(1 for r in labeled if r["predicted_label"] == "violation" and not r["true_label"])
        fn = sum(1 for r in labeled if r["predicted_label"] == "pass" and r["true_label"])
        precision = tp / (tp + fp) if (tp + fp) else None
        recall = tp / (tp + fn) if (tp + fn) else None
        return precision, recall, len(labeled)

    def metrics(self, run_id: str) -> dict:
        records = self.constraint_invocations(run_id)
        by_constraint: dict[str, list[dict]] = {}
        for rec in records:
            by_constraint.setdefault(rec["constraint_id"], []).append(rec)
        out = []
        for cid in sorted(by_constraint):
            recs = by_constraint[cid]
            first = [r for r in recs if r["attempt"] == 0]
            passes = sum(1 for r in first if r["predicted_label"] == "pass")
            precision, recall, n_labeled = self.compute_precision_recall(run_id, cid)
            mechanisms = {r["impl"]["mechanism"] for r in recs}
            out.append(
                {
                    "constraint_id": cid,
                    "invocations": len(recs),
                    "selectivity": passes / len(first) if first else None,
                    "precision": precision,
                    "recall": recall,
                    "n_labeled": n_labeled,
                    "deterministic": mechanisms == {"deterministic"},
                    "description": recs[0].get("description", ""),
                }
            )
        record = self.run_record(run_id)
        return {
            "run_id": run_id,
            "status": record.get("status"),
            "totals": record.get("totals", {}),
            "operator_reliability": record.get("totals", {}).get("operator_reliability", {}),
            "constraints": out,
        }

    # -- labeling ---------------------------------------------------------------

    def labeling_queue(
        self,
        run_id: str,
        constraint_id: str | None = None,
        sample: int | None = None,
        seed: int = 0,
    ) -> list[dict]:
        """Unlabeled stochastic invocation records in invocation order.

        Labeling is exhaustive by default; ``sample`` draws a uniform subset
        (seeded, order-preserving) for larger runs.
        """
        out = []
        for rec in self.constraint_invocations(run_id):
            if rec["impl"]["mechanism"] == "deterministic":
                continue
            if constraint_id and rec["constraint_id"] != constraint_id:
                continue
            if rec["true_label"] is None:
                out.append(rec)
        if sample is not None and 0 <= sample < len(out):
            import random

            rng = random.Random(seed)
            keep = sorted(rng.sample(range(len(out)), sample))
            out = [out[i] for i in keep]
        return out

    def next_unlabeled(self, run_id: str, constraint_id: str | None = None) -> dict | None:
        queue = self.labeling_queue(run_id, constraint_id)
        return queue[0] if queue else None

    def submit_label(self, invocation_id: str, true_label: bool) -> None:
        """Write-once label; relabeling conflicts, deterministic rejected."""
        run_id = invocation_id.rsplit(":", 1)[0]
        records = {r["invocation_id"]: r for r in self._read_jsonl(run_id, "constraint_invocations.jsonl")}
        if invocation_id not in records:
            raise ObservabilityError(f"unknown invocation '{invocation_id}'")
        if records[invocation_id]["impl"]["mechanism"] == "deterministic":
            raise ObservabilityError(
                f"invocation '{invocation_id}' used a deterministic check; it takes no labels"
            )
        with _label_lock(self.root / run_id):
            if invocation_id in self.labels(run_id):
                raise LabelConflictError(f"invocation '{invocation_id}' is already labeled")
            with open(self.root / run_id / "labels.jsonl", "a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {
                            "invocation_id": invocation_id,
                            "true_label": bool(true_label),
                            "ts": _now(),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    # -- tuples and lineage -------------------------------------------------------

    def flagged_tuples(self, run_id: str) -> list[dict]:
        return [row for row in self.results(run_id) if row.get("_flags")]

    def lineage_tree(self, tuple_id: str, run_id: str | None = None) -> dict:
        """Full ancestor closure as a nested tree with operator labels."""
        run_ids = [run_id] if run_id else list(reversed(self.run_ids()))
        for rid in run_ids:
            records = self.lineage_records(rid)
            if not records and run_id is None:
                continue
            parents: dict[str, list[tuple[str, str]]] = {}
            known = set()
            for rec in records:
                parents.setdefault(rec["child"], []).append((rec["parent"], rec["op_alias"]))
                known.add(rec["child"])
                known.add(rec["parent"])
            if tuple_id not in known and run_id is None:
                continue

            def build(tid: str, seen: frozenset[str]) -> dict:
                if tid in seen:
                    raise ObservabilityError(f"lineage cycle at tuple '{tid}'")
                entries = parents.get(tid, [])
                return {
                    "tuple_id": tid,
                    "parents": [
                        {"op_alias": alias, **build(pid, seen | {tid})}
                        for pid, alias in entries
                    ],
                }

            return {"run_id": rid, **build(tuple_id, frozenset())}
        raise ObservabilityError(f"tuple '{tuple_id}' not found in any run")

    def conservation_check(self, run_id: str) -> list[str]:
        """Per-stage accounting: in == out + ignored + filtered + discarded."""
        problems = []
        for st in self.run_record(run_id).get("stage_stats", []):
            lhs = st["in"]
            rhs = st["out"] + st["ignored"] + st["filtered"] + st["discarded"]
            if lhs != rhs:
                problems.append(
                    f"stage {st['index']} ({st['alias']}): {lhs} in vs {rhs} accounted"
                )
        return problems


_label_locks: dict[str, threading.Lock] = {}
_label_locks_guard = threading.Lock()


def _label_lock(run_dir: Path) -> threading.Lock:
    key = str(run_dir.resolve())
    with _label_locks_guard:
        if key not in _label_locks:
            _label_locks[key] = threading.Lock()
        return _label_locks[key]
