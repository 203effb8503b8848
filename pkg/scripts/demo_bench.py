#!/usr/bin/env python3
"""Benchmark harness demo: run a tiny task suite with the stub gateway.

Writes a handful of animation/symbolic tasks, generates and executes candidate
programs, scores them with the stub judge, and prints the aggregated report.

Usage:
    python scripts/demo_bench.py [--workdir demo_bench_out]
"""

import argparse
import json
import shutil
from pathlib import Path

import yaml

from vizforge.bench import aggregate_report, format_report, load_tasks, run_suite, score_record
from vizforge.config import load_config
from vizforge.gateway import StubGateway
from vizforge.store import CorpusStore

TASKS = [
    {
        "task_id": "circle-sweep",
        "engine": "manim",
        "instruction": "Animate a circle sweeping from left to right.",
        "reference_code": "class CircleSweep(Scene):\n    pass\n",
    },
    {
        "task_id": "sine-trace",
        "engine": "manim",
        "instruction": "Trace a sine curve while a dot follows it.",
        "reference_code": "class SineTrace(Scene):\n    pass\n",
    },
    {
        "task_id": "series-sum",
        "engine": "wolfram",
        "instruction": "Visualize partial sums of an alternating series.",
        "reference_code": "Plot[Sum[(-1)^k/k, {k, 1, n}], {n, 1, 20}]",
    },
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", type=Path, default=Path("demo_bench_out"))
    ap.add_argument("--fresh", action="store_true", help="wipe the workdir first")
    args = ap.parse_args()

    if args.fresh and args.workdir.exists():
        shutil.rmtree(args.workdir)
    args.workdir.mkdir(parents=True, exist_ok=True)

    tasks_path = args.workdir / "tasks.jsonl"
    with tasks_path.open("w", encoding="utf-8") as fh:
        for task in TASKS:
            fh.write(json.dumps(task) + "\n")

    config_path = args.workdir / "config.yaml"
    config_path.write_text(
        yaml.safe_dump({"corpus_dir": str(args.workdir / "corpus")}), encoding="utf-8"
    )
    config = load_config(config_path)

    out = args.workdir / "bench"
    out.mkdir(exist_ok=True)
    print(
        f"(equivalent CLI: vizforge --config {config_path} --stub-gateway "
        f"bench --tasks {tasks_path} --out {out})\n"
    )

    gateway = StubGateway()
    store = CorpusStore(Path(config.corpus_dir))
    tasks = load_tasks(tasks_path)
    records = run_suite(gateway, tasks, config, store, out / "bench_records.jsonl")
    by_id = {t.task_id: t for t in tasks}
    scores = [score_record(gateway, by_id[r.task_id], r) for r in records]

    with (out / "scores.jsonl").open("w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(json.dumps(s.to_dict()) + "\n")

    report = aggregate_report(scores)
    (out / "report.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(format_report(report))


if __name__ == "__main__":
    main()
