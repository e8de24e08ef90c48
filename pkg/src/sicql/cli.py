"""Command-line entry points: run, explain, serve, store, report.

Exit codes from ``run`` are stable for scripting: 0 completed, 1 error,
2 aborted by an ABORT-mode constraint.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import sys
from pathlib import Path

import click

from sicql import logical, physical
from sicql.config import AppConfig, build_model_client
from sicql.engine import RunContext, execute
from sicql.errors import SicqlError
from sicql.lang import format_plan, parse_query
from sicql.logical import ConstraintStats
from sicql.observability import ObservabilityStore, RunWriter
from sicql.physical import Capabilities, Profile
from sicql.lang.formatter import render_constraint
from sicql.store import ConstraintStore, StoredConstraint


def _load_config(path: str | None) -> AppConfig:
    return AppConfig.load(path) if path else AppConfig()


def _load_profile(config: AppConfig, override: str | None) -> Profile:
    path = override or config.profile_path
    return Profile.load(path) if path else Profile()


def _capabilities(config: AppConfig, client) -> Capabilities:
    return Capabilities(
        judges=(client.name,),
        token_mask=getattr(client, "token_mask_capable", False),
        stream_checks=getattr(client, "stream_capable", False),
        decode_allowlist=config.engine.decode_allowlist,
    )


def _reorder_stats(profile: Profile) -> dict[str, ConstraintStats]:
    stats = {}
    for cid, entry in profile.constraints.items():
        costs = [c["cost"] for c in entry.candidates if "cost" in c]
        stats[cid] = ConstraintStats(
            constraint_id=cid,
            cost=min(costs) if costs else 1.0,
            selectivity=entry.selectivity_value(),
        )
    return stats


def _plan(query_text: str, config: AppConfig, profile: Profile, client):
    plan = parse_query(
        query_text,
        default_retry=config.engine.default_retry,
        default_failure_mode=config.engine.default_failure_mode,
    )
    plan = logical.optimize_logical(
        plan,
        stats=_reorder_stats(profile),
        enable_relevance=config.engine.enable_default_relevance,
        default_retry=config.engine.default_retry,
        default_mode=config.engine.default_failure_mode,
    )
    return physical.select_plan(
        plan, profile, profile.thresholds, _capabilities(config, client)
    )


def _deterministic_run_id(query_text: str, seed: int, data_dir: str) -> str:
    digest = hashlib.sha256(f"{query_text}\x1f{seed}\x1f{data_dir}".encode("utf-8")).hexdigest()
    return f"run-{digest[:12]}"


@click.group()
def main() -> None:
    """Semantic query engine with declarative integrity constraints."""


@main.command()
@click.argument("query_path", type=click.Path(exists=True))
@click.argument("data_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--profile", "profile_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--run-id", default=None, help="Run id (defaults to a content hash).")
@click.option("--out", type=click.Path(), default=None, help="Also copy results.jsonl here.")
def run(query_path, data_dir, config_path, profile_path, seed, run_id, out):
    """Parse, plan and execute a query over the tables in DATA_DIR."""
    try:
        config = _load_config(config_path)
        profile = _load_profile(config, profile_path)
        client = build_model_client(config, seed=seed)
        query_text = Path(query_path).read_text(encoding="utf-8")
        pplan = _plan(query_text, config, profile, client)

        datasets = {}
        for st in pplan.logical.stages:
            table = getattr(st, "table", None)
            if table is None:
                continue
            for ext in (".jsonl", ".ndjson", ".csv"):
                candidate = Path(data_dir) / f"{table}{ext}"
                if candidate.exists():
                    datasets[table] = candidate
                    break
            else:
                click.echo(f"error: no dataset file for table '{table}' in {data_dir}", err=True)
                sys.exit(1)

        run_id = run_id or _deterministic_run_id(query_text, seed, str(data_dir))
        run_root = Path(config.run_dir)
        base, n = run_id, 1
        while (run_root / run_id).exists():
            n += 1
            run_id = f"{base}-{n}"
        writer = RunWriter(run_root, run_id, query_text, seed)
        writer.set_plans(format_plan(pplan.logical), format_plan(pplan, level="physical"))

        ctx = RunContext(run_id=run_id, seed=seed, config=config.engine, client=client, writer=writer)
        result = execute(pplan, datasets, ctx)

        click.echo(f"run {run_id}: {result.status}")
        for key in ("tuples_in", "tuples_out", "flagged", "retries", "cost_units"):
            click.echo(f"  {key}: {result.totals[key]}")
        if out and result.status == "completed":
            shutil.copyfile(run_root / run_id / "results.jsonl", out)
        if result.status == "completed":
            sys.exit(0)
        if result.status == "aborted":
            click.echo(f"aborted: {result.error}", err=True)
            sys.exit(2)
        click.echo(f"error: {result.error}", err=True)
        sys.exit(1)
    except SicqlError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.argument("query_path", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--profile", "profile_path", type=click.Path(exists=True), default=None)
@click.option("--level", type=click.Choice(["logical", "physical"]), default="logical")
def explain(query_path, config_path, profile_path, level):
    """Print the optimized plan; physical level shows chosen enforcement."""
    try:
        config = _load_config(config_path)
        profile = _load_profile(config, profile_path)
        client = build_model_client(config)
        query_text = Path(query_path).read_text(encoding="utf-8")
        pplan = _plan(query_text, config, profile, client)
        if level == "logical":
            click.echo(format_plan(pplan.logical))
            return
        pplan.warnings.extend(_store_warnings(config, pplan))
        click.echo(format_plan(pplan, level="physical"))
    except SicqlError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


def _store_warnings(config: AppConfig, pplan) -> list[str]:
    """Conflicts between this plan's constraints and registered ones."""
    store_file = Path(config.store_path)
    store = ConstraintStore(store_file)
    plan_items = []
    for decl in pplan.logical.constraints():
        plan_items.append(
            StoredConstraint(
                constraint_id=decl.constraint_id,
                decl_text=render_constraint(decl),
                description="",
            )
        )
    conflicts = store.detect_conflicts(plan_items + store.all())
    plan_ids = {i.constraint_id for i in plan_items}
    return [
        f"{c.kind}: {c.first} vs {c.second}: {c.explanation}"
        for c in conflicts
        if c.first in plan_ids or c.second in plan_ids
    ]


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--port", type=int, default=None)
@click.option("--run-dir", type=click.Path(), default=None)
@click.option("--frontend", type=click.Path(), default=None, help="Static UI directory.")
def serve(config_path, port, run_dir, frontend):
    """Serve the observability and labeling HTTP API."""
    import uvicorn

    from sicql.service import create_app

    config = _load_config(config_path)
    app = create_app(
        run_root=run_dir or config.run_dir,
        store_path=config.store_path,
        frontend_dir=frontend,
        judge=None,
    )
    uvicorn.run(app, host="127.0.0.1", port=port or config.port)


@main.command()
@click.argument("run_id")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--run-dir", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), default=None, help="Report directory (default: <run dir>/report).")
def report(run_id, config_path, run_dir, out):
    """Write metrics.csv and figures for a finished run."""
    from sicql.report import write_report

    try:
        config = _load_config(config_path)
        root = Path(run_dir or config.run_dir)
        out_dir = Path(out) if out else root / run_id / "report"
        written = write_report(root, run_id, out_dir)
        for path in written:
            click.echo(str(path))
    except SicqlError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.group()
def store() -> None:
    """Organization-wide constraint store."""


@store.command()
@click.argument("constraint_id")
@click.argument("decl_text")
@click.option("--description", default="")
@click.option("--tags", default="", help="Comma-separated tags.")
@click.option("--provenance", default="")
@click.option("--soft", is_flag=True, default=False)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def register(constraint_id, decl_text, description, tags, provenance, soft, config_path):
    """Register a reusable constraint (DECL_TEXT is an ASSERT body)."""
    try:
        config = _load_config(config_path)
        cstore = ConstraintStore(config.store_path)
        cstore.register(
            constraint_id,
            decl_text,
            description,
            tags=tuple(t for t in tags.split(",") if t),
            provenance=provenance,
            soft=soft,
        )
        click.echo(constraint_id)
    except SicqlError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@store.command()
@click.argument("query_text")
@click.option("-k", type=int, default=5, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def recommend(query_text, k, config_path):
    """Rank stored constraints by similarity to QUERY_TEXT."""
    try:
        config = _load_config(config_path)
        cstore = ConstraintStore(config.store_path)
        for item, score in cstore.recommend(query_text, k):
            click.echo(f"{score:.4f}  {item.constraint_id}  {item.decl_text}")
    except SicqlError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@store.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def conflicts(config_path):
    """List statically detected conflicts among stored constraints."""
    try:
        config = _load_config(config_path)
        cstore = ConstraintStore(config.store_path)
        found = cstore.detect_conflicts()
        for c in found:
            click.echo(f"{c.kind}: {c.first} vs {c.second}: {c.explanation}")
        if not found:
            click.echo("no conflicts detected")
    except SicqlError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
