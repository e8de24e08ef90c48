"""HTTP API over runs, labeling and the constraint store.

All endpoints return JSON; errors use ``{"code": ..., "message": ...}``.
Read endpoints are side-effect-free; ``POST /labels`` is the only mutating
observability endpoint and is write-once per invocation. When a frontend
directory is configured it is served statically at the root.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from sicql.errors import LabelConflictError, ObservabilityError, StoreError
from sicql.observability import ObservabilityStore
from sicql.store import ConstraintStore


class LabelSubmission(BaseModel):
    invocation_id: str
    true_label: bool


def create_app(
    run_root: str | Path,
    store_path: str | Path = "constraint_store.jsonl",
    frontend_dir: str | Path | None = None,
    judge=None,
) -> FastAPI:
    app = FastAPI(title="sicql observability", docs_url=None, redoc_url=None)
    obs = ObservabilityStore(run_root)
    store = ConstraintStore(store_path)

    @app.exception_handler(LabelConflictError)
    async def _conflict(_: Request, exc: LabelConflictError):
        return JSONResponse(status_code=409, content={"code": "conflict", "message": str(exc)})

    @app.exception_handler(ObservabilityError)
    async def _obs_error(_: Request, exc: ObservabilityError):
        return JSONResponse(status_code=404, content={"code": "not_found", "message": str(exc)})

    @app.exception_handler(StoreError)
    async def _store_error(_: Request, exc: StoreError):
        return JSONResponse(status_code=404, content={"code": "not_found", "message": str(exc)})

    @app.get("/runs")
    def list_runs():
        out = []
        for run_id in obs.run_ids():
            rec = obs.run_record(run_id)
            out.append(
                {
                    "run_id": run_id,
                    "status": rec.get("status"),
                    "started_at": rec.get("started_at"),
                    "totals": rec.get("totals", {}),
                }
            )
        return out

    @app.get("/runs/{run_id}")
    def run_detail(run_id: str):
        return obs.run_record(run_id)

    @app.get("/runs/{run_id}/metrics")
    def run_metrics(run_id: str):
        return obs.metrics(run_id)

    @app.get("/runs/{run_id}/tuples")
    def run_tuples(run_id: str, flagged: bool | None = None):
        rows = obs.results(run_id)
        if flagged is True:
            rows = [r for r in rows if r.get("_flags")]
        elif flagged is False:
            rows = [r for r in rows if not r.get("_flags")]
        return rows

    @app.get("/tuples/{tuple_id}/lineage")
    def tuple_lineage(tuple_id: str, run: str | None = None):
        return obs.lineage_tree(tuple_id, run)

    @app.get("/labels/next")
    def next_label(run: str, constraint: str | None = None):
        task = obs.next_unlabeled(run, constraint)
        remaining = len(obs.labeling_queue(run, constraint))
        return {"task": task, "remaining": remaining}

    @app.post("/labels")
    def submit_label(body: LabelSubmission):
        obs.submit_label(body.invocation_id, body.true_label)
        return {"ok": True}

    @app.get("/constraints/recommend")
    def recommend(q: str, k: int = 5):
        ranked = store.recommend(q, k, judge=judge)
        return [
            {"constraint": item.to_json(), "score": round(score, 6)}
            for item, score in ranked
        ]

    @app.get("/constraints/conflicts")
    def conflicts():
        return [
            {
                "first": c.first,
                "second": c.second,
                "kind": c.kind,
                "explanation": c.explanation,
            }
            for c in store.detect_conflicts(judge=judge)
        ]

    if frontend_dir is not None and Path(frontend_dir).exists():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="frontend")
    return app
