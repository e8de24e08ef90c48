"""CLI contract: run/explain/store/report, exit codes, determinism."""

import json

import pytest
from click.testing import CliRunner

from sicql.cli import main

from .conftest import LISTING1_EXT, listing1_script, make_ehr_rows


@pytest.fixture
def workspace(tmp_path):
    """Query, data, fake-model script and config files on disk."""
    (tmp_path / "query.sicql").write_text(LISTING1_EXT, encoding="utf-8")
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    with open(data_dir / "ehr_table.jsonl", "w", encoding="utf-8") as fh:
        for row in make_ehr_rows(5):
            fh.write(json.dumps(row) + "\n")
    script = listing1_script()
    script_path = tmp_path / "model.json"
    script_path.write_text(
        json.dumps(
            {
                "rules": script.rules,
                "judge": {
                    "default_verdict": script.default_verdict,
                    "default_confidence": script.default_confidence,
                    "rules": script.judge_rules,
                },
            }
        ),
        encoding="utf-8",
    )
    config = {
        "defaults": {
            "relevance": True,
            "decode_allowlist": ["grounding-extractive"],
            "current_date": "2025-01-01",
        },
        "model": {"kind": "fake", "script": str(script_path)},
        "run_dir": str(tmp_path / "runs"),
        "store": str(tmp_path / "constraint_store.jsonl"),
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    return tmp_path, config_path, data_dir


class TestRun:
    def test_completed_run_exit_zero(self, workspace):
        tmp_path, config_path, data_dir = workspace
        runner = CliRunner()
        result = runner.invoke(
            main,
            [
                "run", str(tmp_path / "query.sicql"), str(data_dir),
                "--config", str(config_path), "--seed", "7", "--run-id", "run-a",
                "--out", str(tmp_path / "results.jsonl"),
            ],
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "runs" / "run-a" / "results.jsonl").exists()
        assert (tmp_path / "results.jsonl").exists()

    def test_missing_table_exit_one(self, workspace, tmp_path):
        _, config_path, _ = workspace
        empty = tmp_path / "empty"
        empty.mkdir()
        runner = CliRunner()
        result = runner.invoke(
            main,
            ["run", str(tmp_path / "query.sicql"), str(empty), "--config", str(config_path)],
        )
        assert result.exit_code == 1
        assert "no dataset file" in result.output

    def test_abort_scenario_exit_two(self, workspace):
        tmp_path, config_path, data_dir = workspace
        query = (
            "FROM ehr_table |> SET dob = p'canonicalize {dob} into YYYY-MM-DD' "
            "|> ASSERT REGEXP_CONTAINS(dob, r'^x$') RETRY 0 ABORT ON FAIL"
        )
        qpath = tmp_path / "abort.sicql"
        qpath.write_text(query)
        runner = CliRunner()
        result = runner.invoke(
            main,
            ["run", str(qpath), str(data_dir), "--config", str(config_path), "--run-id", "run-abort"],
        )
        assert result.exit_code == 2
        # Partial run directory retained.
        record = json.loads((tmp_path / "runs" / "run-abort" / "run.json").read_text())
        assert record["status"] == "aborted"

    def test_deterministic_rerun_identical_results(self, workspace):
        tmp_path, config_path, data_dir = workspace
        runner = CliRunner()
        for rid in ("d1", "d2"):
            result = runner.invoke(
                main,
                [
                    "run", str(tmp_path / "query.sicql"), str(data_dir),
                    "--config", str(config_path), "--seed", "11", "--run-id", rid,
                ],
            )
            assert result.exit_code == 0, result.output
        r1 = (tmp_path / "runs" / "d1" / "results.jsonl").read_bytes()
        r2 = (tmp_path / "runs" / "d2" / "results.jsonl").read_bytes()
        assert r1 == r2
        # Whole run directory matches modulo timestamps and the run id.
        for name in ("op_invocations.jsonl", "constraint_invocations.jsonl", "lineage.jsonl"):
            a = _normalize(tmp_path / "runs" / "d1" / name, "d1")
            b = _normalize(tmp_path / "runs" / "d2" / name, "d2")
            assert a == b, name


def _normalize(path, run_id):
    out = []
    for line in path.read_text().splitlines():
        rec = json.loads(line)
        rec.pop("ts", None)
        rec.pop("run_id", None)
        if "invocation_id" in rec:
            rec["invocation_id"] = rec["invocation_id"].replace(run_id, "RUN")
        out.append(json.dumps(rec, sort_keys=True))
    return out


class TestExplain:
    def test_logical_shows_pushdown(self, workspace):
        tmp_path, config_path, _ = workspace
        runner = CliRunner()
        result = runner.invoke(
            main, ["explain", str(tmp_path / "query.sicql"), "--config", str(config_path)]
        )
        assert result.exit_code == 0, result.output
        lines = result.output.splitlines()
        phys_idx = next(i for i, l in enumerate(lines) if "AS phys_exam" in l)
        assert "phys_exam GROUNDED" in lines[phys_idx + 1]

    def test_physical_tags_deterministic_reactive(self, workspace):
        tmp_path, config_path, _ = workspace
        runner = CliRunner()
        result = runner.invoke(
            main,
            ["explain", str(tmp_path / "query.sicql"), "--config", str(config_path),
             "--level", "physical"],
        )
        assert result.exit_code == 0, result.output
        regex_line = next(l for l in result.output.splitlines() if "REGEXP_CONTAINS" in l)
        assert "[deterministic]" in regex_line and "[reactive]" in regex_line
        assert "[stochastic:fake]" in result.output
        assert "estimated plan cost" in result.output

    def test_conflicting_registered_constraint_warns(self, workspace):
        tmp_path, config_path, _ = workspace
        runner = CliRunner()
        reg = runner.invoke(
            main,
            ["store", "register", "org-dob-format",
             "REGEXP_CONTAINS(dob, r'^x+$')",
             "--description", "legacy dob format", "--config", str(config_path)],
        )
        assert reg.exit_code == 0, reg.output
        result = runner.invoke(
            main,
            ["explain", str(tmp_path / "query.sicql"), "--config", str(config_path),
             "--level", "physical"],
        )
        assert result.exit_code == 0, result.output
        assert "empty-regex-intersection" in result.output


class TestStoreCommands:
    def test_register_recommend_conflicts(self, workspace):
        _, config_path, _ = workspace
        runner = CliRunner()
        assert runner.invoke(
            main,
            ["store", "register", "pii", "summary EXCLUDES p'PII'",
             "--description", "exclude patient identifiers from summaries",
             "--config", str(config_path)],
        ).exit_code == 0
        assert runner.invoke(
            main,
            ["store", "register", "dose-unit", "dose IN ('mg', 'ml')",
             "--description", "dose units", "--config", str(config_path)],
        ).exit_code == 0
        rec = runner.invoke(
            main,
            ["store", "recommend", "summarize patient history", "-k", "1",
             "--config", str(config_path)],
        )
        assert rec.exit_code == 0
        assert "pii" in rec.output
        assert runner.invoke(
            main,
            ["store", "register", "dose-unit-2", "dose IN ('kg')",
             "--description", "conflicting dose units", "--config", str(config_path)],
        ).exit_code == 0
        conflicts = runner.invoke(main, ["store", "conflicts", "--config", str(config_path)])
        assert "disjoint-domain" in conflicts.output


class TestReport:
    def test_report_writes_csv_and_figures(self, workspace):
        tmp_path, config_path, data_dir = workspace
        runner = CliRunner()
        assert runner.invoke(
            main,
            ["run", str(tmp_path / "query.sicql"), str(data_dir),
             "--config", str(config_path), "--run-id", "run-r"],
        ).exit_code == 0
        result = runner.invoke(
            main, ["report", "run-r", "--config", str(config_path)]
        )
        assert result.exit_code == 0, result.output
        report_dir = tmp_path / "runs" / "run-r" / "report"
        assert (report_dir / "metrics.csv").exists()
        assert (report_dir / "selectivity.png").exists()
        assert (report_dir / "operator_cost.png").exists()
        header = (report_dir / "metrics.csv").read_text().splitlines()[0]
        assert header.startswith("constraint_id,")
