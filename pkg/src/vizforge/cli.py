"""Operator command line: pipeline stages, bench, reports, review server.

Machine-readable summaries go to stdout as JSON; logs go to stderr.
Exit codes: 0 clean, 1 fatal stage error, 2 config error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .bench import aggregate_report, format_report, load_tasks, run_suite, score_record
from .config import PipelineConfig, load_config
from .errors import ConfigError, EmptyReportError, FatalStageError, TemplateError, VizforgeError
from .gateway import Gateway, HttpGateway, StubGateway
from .pipeline import STAGES, Pipeline
from .review import ReviewStore, create_app
from .store import CorpusStore


def _build_gateway(config: PipelineConfig, stub: bool, run_id: str = "") -> Gateway:
    kwargs = dict(
        templates_dir=config.templates_dir,
        call_log=Path(config.corpus_dir) / "gateway_calls.jsonl",
        run_id=run_id,
        retries=config.gateway_retries,
    )
    return StubGateway(**kwargs) if stub else HttpGateway(**kwargs)


def _check_templates(config: PipelineConfig, gateway: Gateway) -> None:
    for tid in (
        "evolve",
        "recontextualize",
        "reverse_instruction",
        "reverse_code",
        "translate_instruction",
        "translate_code",
        "judge_reward_vision",
        "judge_reward_text",
    ):
        gateway.template_path(tid)


@click.group()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--stub-gateway/--real-gateway", default=False)
@click.option("--max-parallel", type=int, default=None)
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx, config_path, stub_gateway, max_parallel, verbose):
    logging.basicConfig(
        stream=sys.stderr, level=logging.DEBUG if verbose else logging.INFO
    )
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc} (keys: {', '.join(exc.keys)})", err=True)
        ctx.exit(2)
    if max_parallel:
        config.max_parallel = max_parallel
    ctx.obj = {"config": config, "stub": stub_gateway}


def _run_stages(ctx, stages):
    config: PipelineConfig = ctx.obj["config"]
    gateway = _build_gateway(config, ctx.obj["stub"])
    try:
        _check_templates(config, gateway)
    except TemplateError as exc:
        click.echo(f"config error: {exc}", err=True)
        ctx.exit(2)
    store = CorpusStore(Path(config.corpus_dir))
    try:
        summary = Pipeline(config, store, gateway).run(stages)
    except (FatalStageError, VizforgeError) as exc:
        click.echo(f"fatal: {exc}", err=True)
        ctx.exit(1)
    click.echo(json.dumps(summary, indent=2))


@main.command()
@click.option("--stages", default=",".join(STAGES), help="comma-separated stage filter")
@click.pass_context
def run(ctx, stages):
    """Run the selected pipeline stages in order."""
    _run_stages(ctx, [s.strip() for s in stages.split(",") if s.strip()])


def _single_stage(name, help_text):
    @main.command(name=name, help=help_text)
    @click.pass_context
    def cmd(ctx):
        _run_stages(ctx, [name])

    return cmd


_single_stage("ingest", "Pull, classify, and commit raw source items.")
_single_stage("decompose", "Split long scripts into semantic units.")
_single_stage("synth", "Plan and execute synthesis tasks.")
_single_stage("validate", "Execute candidates in the sandbox.")
_single_stage("reward", "Judge candidates with the four-dimension rubric.")
_single_stage("export", "Apply the retention filter and write exports.")


@main.command()
@click.option("--tasks", "tasks_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_context
def bench(ctx, tasks_path, out_dir):
    """Run the dynamic-visualization benchmark suite and score it."""
    config: PipelineConfig = ctx.obj["config"]
    gateway = _build_gateway(config, ctx.obj["stub"])
    store = CorpusStore(Path(config.corpus_dir))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = load_tasks(tasks_path)
    try:
        records = run_suite(gateway, tasks, config, store, out / "bench_records.jsonl")
    except VizforgeError as exc:
        click.echo(f"fatal: {exc}", err=True)
        ctx.exit(1)
    faith = ReviewStore(Path(config.corpus_dir) / "review").faith_scores()
    by_id = {t.task_id: t for t in tasks}
    scores = [
        score_record(gateway, by_id[r.task_id], r, faith.get(r.task_id)) for r in records
    ]
    with (out / "scores.jsonl").open("w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(json.dumps(s.to_dict()) + "\n")
    try:
        report = aggregate_report(scores)
    except EmptyReportError as exc:
        click.echo(f"fatal: {exc}", err=True)
        ctx.exit(1)
    (out / "report.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
    (out / "report.txt").write_text(format_report(report) + "\n", encoding="utf-8")
    click.echo(json.dumps(report, indent=2))


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(exists=True))
@click.pass_context
def report(ctx, out_dir):
    """Re-aggregate an existing bench run (picks up new faith scores)."""
    config: PipelineConfig = ctx.obj["config"]
    out = Path(out_dir)
    scores_path = out / "scores.jsonl"
    if not scores_path.exists():
        click.echo("fatal: no scores.jsonl in --out", err=True)
        ctx.exit(1)
    from .bench import BenchScore

    faith = ReviewStore(Path(config.corpus_dir) / "review").faith_scores()
    scores = []
    for line in scores_path.read_text(encoding="utf-8").splitlines():
        if not line:
            continue
        d = json.loads(line)
        f = faith.get(d["task_id"])
        scores.append(
            BenchScore(
                task_id=d["task_id"],
                engine=d["engine"],
                s_exec=d["s_exec"],
                s_sim=d.get("s_sim"),
                s_align=d.get("s_align"),
                s_faith=f if f is not None else d.get("s_faith"),
                faith_included=f is not None or d.get("faith_included", False),
                unscored=d.get("unscored", False),
            )
        )
    try:
        rep = aggregate_report(scores)
    except EmptyReportError as exc:
        click.echo(f"fatal: {exc}", err=True)
        ctx.exit(1)
    (out / "report.json").write_text(json.dumps(rep, indent=2), encoding="utf-8")
    (out / "report.txt").write_text(format_report(rep) + "\n", encoding="utf-8")
    click.echo(json.dumps(rep, indent=2))


@main.command(name="review-serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8777)
@click.pass_context
def review_serve(ctx, host, port):
    """Serve the human-review API (and the static UI if built)."""
    import uvicorn

    config: PipelineConfig = ctx.obj["config"]
    store = CorpusStore(Path(config.corpus_dir))
    review_store = ReviewStore(Path(config.corpus_dir) / "review")
    app = create_app(review_store, config.annotators, corpus_store=store)
    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
