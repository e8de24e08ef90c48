"""Capture real API payloads from the engine for the frontend test suite.

Runs two pipelines (the EHR example with a CONTINUE-flagged tuple, and an
aggregate query), labels three records through the observability store, and
freezes every payload the UI consumes into tests/fixtures/payloads.json.
Regenerate with: python3 scripts/generate_fixtures.py
"""

from __future__ import annotations

import datetime as dt
import json
import sys
from pathlib import Path

FRONTEND = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(FRONTEND.parent / "src"))
sys.path.insert(0, str(FRONTEND.parent / "tests"))

from conftest import LISTING1_EXT, listing1_script, make_ehr_rows  # noqa: E402

from sicql import logical, physical  # noqa: E402
from sicql.config import EngineConfig  # noqa: E402
from sicql.engine import RunContext, execute  # noqa: E402
from sicql.lang import parse_query  # noqa: E402
from sicql.models import FakeModel, FakeModelScript  # noqa: E402
from sicql.observability import ObservabilityStore, RunWriter  # noqa: E402
from sicql.physical import Capabilities  # noqa: E402


def run(plan_text: str, script, rows, run_root: Path, run_id: str, table: str) -> None:
    config = EngineConfig(
        decode_allowlist=frozenset({"grounding-extractive"}),
        current_date=dt.date(2025, 1, 1),
    )
    client = FakeModel(script, seed=7)
    plan = logical.optimize_logical(parse_query(plan_text), enable_relevance=False)
    pplan = physical.select_plan(
        plan,
        capabilities=Capabilities(
            judges=(client.name,), token_mask=True, stream_checks=True,
            decode_allowlist=config.decode_allowlist,
        ),
    )
    writer = RunWriter(run_root, run_id, plan_text, 7)
    from sicql.lang import format_plan

    writer.set_plans(format_plan(pplan.logical), format_plan(pplan, level="physical"))
    ctx = RunContext(run_id=run_id, seed=7, config=config, client=client, writer=writer)
    result = execute(pplan, {table: rows}, ctx)
    assert result.status == "completed", result.error


AGG_QUERY = (
    "FROM visits\n"
    "|> EXTEND EXTRACTIVE p'extract the complaint from the {note}' AS complaint STRING\n"
    "|> AGGREGATE p'summarize the complaints: {complaint}' AS dept_summary STRING GROUP BY dept\n"
    "|> ASSERT dept_summary GROUNDED\n"
)

AGG_SCRIPT = FakeModelScript.from_dict(
    {
        "rules": [
            {"match": "extract the complaint", "copy_field": "note", "between": ["C:", ";"], "strip": True},
            {"match": "summarize the complaints", "response": "recurring complaints in this department"},
        ],
        "judge": {"default_verdict": True, "default_confidence": 0.9},
    }
)

AGG_ROWS = [
    {"dept": "cardio", "note": "C: chest pain; stable"},
    {"dept": "cardio", "note": "C: palpitations; monitored"},
    {"dept": "cardio", "note": "C: shortness of breath; resting"},
    {"dept": "ortho", "note": "C: knee pain; imaging"},
]


def main() -> None:
    import tempfile

    out_path = FRONTEND / "tests" / "fixtures" / "payloads.json"
    with tempfile.TemporaryDirectory() as td:
        run_root = Path(td) / "runs"
        run(LISTING1_EXT, listing1_script(), make_ehr_rows(6), run_root, "run-ehr", "ehr_table")
        run(AGG_QUERY, AGG_SCRIPT, AGG_ROWS, run_root, "run-agg", "visits")

        store = ObservabilityStore(run_root)
        payload: dict = {
            "runs": [
                {
                    "run_id": rid,
                    "status": store.run_record(rid)["status"],
                    "started_at": store.run_record(rid)["started_at"],
                    "totals": store.run_record(rid)["totals"],
                }
                for rid in store.run_ids()
            ],
            "run_records": {rid: store.run_record(rid) for rid in store.run_ids()},
            "metrics_before": store.metrics("run-ehr"),
            "tuples": {rid: store.results(rid) for rid in store.run_ids()},
        }
        flagged = store.flagged_tuples("run-ehr")
        assert flagged, "fixture must include a CONTINUE-flagged tuple"
        payload["flagged_tuples"] = flagged
        payload["lineage_flagged"] = store.lineage_tree(flagged[0]["_tuple_id"], "run-ehr")
        agg_tuple = store.results("run-agg")[0]["_tuple_id"]
        payload["lineage_aggregate"] = store.lineage_tree(agg_tuple, "run-agg")

        queue = store.labeling_queue("run-ehr")
        assert len(queue) >= 4, "need at least four labelable records"
        # Pick a mix so the post-labeling precision/recall are defined.
        violations = [t for t in queue if t["predicted_label"] == "violation"][:2]
        passes = [t for t in queue if t["predicted_label"] == "pass"][:2]
        tasks = (violations + passes)[:4]
        assert violations, "fixture needs a predicted violation to label"
        payload["label_tasks"] = tasks
        for task in tasks[:3]:
            store.submit_label(task["invocation_id"], task["predicted_label"] == "violation")
        payload["metrics_after"] = store.metrics("run-ehr")

    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")
    print(f"wrote {out_path}")


if __name__ == "__main__":
    main()
