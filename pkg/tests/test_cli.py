import json

import pytest
import yaml
from click.testing import CliRunner

from conftest import write_source_jsonl

from vizforge.cli import main
from vizforge.review import ReviewItem, ReviewStore


@pytest.fixture
def runner():
    return CliRunner()


def write_config(tmp_path, **overrides):
    src = write_source_jsonl(
        tmp_path / "src.jsonl",
        [{"instruction": f"task {i}", "code": f"print({i})\n"} for i in range(3)],
    )
    data = {
        "corpus_dir": str(tmp_path / "corpus"),
        "threshold": "4.0",
        "seed": 3,
        "concepts": {"scientific-pl": ["regression", "filtering"]},
        "sources": [{"source_type": "scientific-pl", "locator": str(src)}],
    }
    data.update(overrides)
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def write_bench_tasks(tmp_path, n=3):
    path = tmp_path / "tasks.jsonl"
    rows = [
        {
            "task_id": f"t{i}",
            "engine": "manim" if i % 2 else "wolfram",
            "instruction": f"draw {i}",
            "reference_code": f"ref {i}",
        }
        for i in range(n)
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return path


class TestRun:
    def test_stub_run_emits_json_summary(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        result = runner.invoke(main, ["--config", str(cfg), "--stub-gateway", "run"])
        assert result.exit_code == 0, result.output + str(result.exception)
        summary = json.loads(result.stdout)
        assert summary["counters"]["ingest"]["accepted"] == 3
        assert "export" in summary["counters"]

    def test_single_stage_command(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        result = runner.invoke(main, ["--config", str(cfg), "--stub-gateway", "ingest"])
        assert result.exit_code == 0
        summary = json.loads(result.stdout)
        assert list(summary["counters"]) == ["ingest"]

    def test_stage_filter_option(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        result = runner.invoke(
            main, ["--config", str(cfg), "--stub-gateway", "run", "--stages", "ingest,synth"]
        )
        assert result.exit_code == 0
        counters = json.loads(result.stdout)["counters"]
        assert "synth" in counters and "reward" not in counters

    def test_bad_config_exits_2(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        data = yaml.safe_load(cfg.read_text())
        data["sources"][0]["source_type"] = "not-a-source"
        cfg.write_text(yaml.safe_dump(data))
        result = runner.invoke(main, ["--config", str(cfg), "--stub-gateway", "run"])
        assert result.exit_code == 2
        assert "source_type" in result.stderr

    def test_missing_template_exits_2(self, runner, tmp_path):
        empty = tmp_path / "templates"
        empty.mkdir()
        cfg = write_config(tmp_path, templates_dir=str(empty))
        result = runner.invoke(main, ["--config", str(cfg), "--stub-gateway", "run"])
        assert result.exit_code == 2
        assert "config error" in result.stderr

    def test_fatal_stage_exits_1(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        data = yaml.safe_load(cfg.read_text())
        data["sources"][0]["locator"] = str(tmp_path / "missing.jsonl")
        cfg.write_text(yaml.safe_dump(data))
        result = runner.invoke(main, ["--config", str(cfg), "--stub-gateway", "run"])
        assert result.exit_code == 1
        assert "fatal" in result.stderr


class TestBench:
    def test_bench_writes_reports(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        tasks = write_bench_tasks(tmp_path)
        out = tmp_path / "bench"
        result = runner.invoke(
            main,
            ["--config", str(cfg), "--stub-gateway", "bench",
             "--tasks", str(tasks), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output + str(result.exception)
        report = json.loads((out / "report.json").read_text())
        assert set(report["engines"]) <= {"manim", "wolfram"}
        assert (out / "bench_records.jsonl").exists()
        assert (out / "scores.jsonl").exists()
        assert "unscored" in (out / "report.txt").read_text()

    def test_report_picks_up_new_faith_scores(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        tasks = write_bench_tasks(tmp_path, n=4)
        out = tmp_path / "bench"
        assert runner.invoke(
            main,
            ["--config", str(cfg), "--stub-gateway", "bench",
             "--tasks", str(tasks), "--out", str(out)],
        ).exit_code == 0
        before = json.loads((out / "report.json").read_text())

        review = ReviewStore(tmp_path / "corpus" / "review")
        review.add_item(ReviewItem(item_id="i1", kind="bench_faith", task_id="t0"))
        review.submit_score("i1", "alice", 5)
        result = runner.invoke(
            main, ["--config", str(cfg), "--stub-gateway", "report", "--out", str(out)]
        )
        assert result.exit_code == 0
        after = json.loads((out / "report.json").read_text())
        wolfram_after = after["engines"]["wolfram"]
        assert wolfram_after["faith_coverage"] == 1
        assert wolfram_after["mean_overall_with_faith"] is not None
        assert before["engines"]["wolfram"]["faith_coverage"] == 0

    def test_report_without_scores_exits_1(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "empty"
        out.mkdir()
        result = runner.invoke(
            main, ["--config", str(cfg), "--stub-gateway", "report", "--out", str(out)]
        )
        assert result.exit_code == 1
