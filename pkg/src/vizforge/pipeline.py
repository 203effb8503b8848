"""Stage orchestrator: ingest -> decompose -> synth -> validate -> reward -> export.

Every stage walks a deterministic worklist (sorted ids), commits one unit
of work at a time, and advances its manifest checkpoint after each commit.
A killed run resumes from the checkpoints; re-executed units are absorbed
by content-addressed dedup and idempotent supersedes, so an interrupted
run converges to the same corpus as an uninterrupted one (with the stub
gateway).
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

from .config import PipelineConfig
from .decompose import parse_units
from .errors import (
    FatalStageError,
    JudgeFormatError,
    MalformedGenerationError,
    VizforgeError,
)
from .gateway import Gateway
from .hashing import canonical_json
from .ingest import ingest_batch
from .records import SampleRecord
from .reward import apply_filter, score_sample
from .sandbox import execute, route_failure
from .store import CorpusStore, RunHandle
from .synthesis import DraftPair, SynthesisTask, plan_tasks, run_task

logger = logging.getLogger(__name__)

STAGES = ("ingest", "decompose", "synth", "validate", "reward", "export")

_KILL_ENV = "VIZFORGE_KILL_AFTER_COMMITS"


class Pipeline:
    def __init__(self, config: PipelineConfig, store: CorpusStore, gateway: Gateway):
        self.config = config
        self.store = store
        self.gateway = gateway
        self._commits = 0
        self._kill_after = int(os.environ.get(_KILL_ENV, "0"))

    def _tick(self) -> None:
        # test hook: simulate a hard kill after N committed units of work
        self._commits += 1
        if self._kill_after and self._commits >= self._kill_after:
            logger.warning("kill hook tripped after %d commits", self._commits)
            os._exit(137)

    # ------------------------------------------------------------------- runs

    def run(self, stages: list[str] | None = None) -> dict:
        selected = [s for s in STAGES if stages is None or s in stages]
        handle = self.store.open_run(self.config.config_hash, list(STAGES))
        if handle.resumed:
            logger.info("resuming run %s", handle.run_id)
        try:
            for stage in selected:
                cp = handle.checkpoint(stage)
                if cp["complete"]:
                    continue
                getattr(self, f"stage_{stage}")(handle)
                handle.complete_stage(stage)
            summary = {
                "run_id": handle.run_id,
                "counters": handle.manifest.counters,
                "fatal_errors": 0,
            }
            return summary
        finally:
            handle.close()

    # ----------------------------------------------------------------- stages

    def stage_ingest(self, handle: RunHandle) -> None:
        cp = handle.checkpoint("ingest")
        sources = sorted(self.config.sources, key=lambda s: (s.source_type, s.locator))
        for i, source in enumerate(sources):
            if i < cp["done"]:
                continue
            stats = ingest_batch(source, self.store)
            handle.count("ingest", "accepted", stats.stored)
            handle.count("ingest", "rejected", stats.malformed)
            handle.count("ingest", "deduped", stats.deduped)
            handle.advance("ingest", source.locator)
            self._tick()

    def stage_decompose(self, handle: RunHandle) -> None:
        # the worklist is status-filtered, so records finished before a kill
        # are naturally absent on resume; no positional skipping
        profile = self.config.decompose
        work = [
            r
            for r in self.store.iter_latest()
            if r.status == "raw"
            and r.format == "CodeOnly"
            and r.language_tag in profile.language_tags
        ]
        units_path = self.store.root / "units.jsonl"
        for record in work:
            try:
                units = parse_units(record.code, profile, record.record_id)
            except VizforgeError as exc:
                logger.warning("decompose failed for %s: %s", record.record_id[:12], exc)
                handle.count("decompose", "rejected")
                handle.advance("decompose", record.record_id)
                continue
            with units_path.open("a", encoding="utf-8") as fh:
                for unit in units:
                    fh.write(unit.to_line() + "\n")
            record.status = "decomposed"
            self.store.supersede(record)
            handle.count("decompose", "accepted", len(units))
            handle.advance("decompose", record.record_id)
            self._tick()
        # de-duplicate unit lines left behind by a killed run
        if units_path.exists():
            seen: set[str] = set()
            lines = []
            for line in units_path.read_text(encoding="utf-8").splitlines():
                if line and line not in seen:
                    seen.add(line)
                    lines.append(line)
            units_path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    def _seed_records(self) -> list[SampleRecord]:
        return [
            r for r in self.store.iter_latest() if r.status in ("raw", "decomposed")
        ]

    def stage_synth(self, handle: RunHandle) -> None:
        cp = handle.checkpoint("synth")
        seeds = {r.record_id: r for r in self._seed_records()}
        tasks = plan_tasks(self.config, list(seeds.values()))
        tasks.sort(key=lambda t: t.task_id)
        for i, task in enumerate(tasks):
            if i < cp["done"]:
                continue
            draft = self._execute_task(handle, task, seeds)
            if draft is not None:
                self._commit_draft(draft, task)
                handle.count("synth", "accepted")
            handle.advance("synth", task.task_id)
            self._tick()

    def _execute_task(
        self, handle: RunHandle, task: SynthesisTask, seeds: dict[str, SampleRecord]
    ) -> DraftPair | None:
        while True:
            try:
                return run_task(self.gateway, self.config, task, seeds, task.feedback)
            except MalformedGenerationError as exc:
                task.attempt += 1
                if task.attempt > self.config.max_retries:
                    logger.warning("task %s exhausted attempts: %s", task.task_id, exc)
                    handle.count("synth", "rejected")
                    return None
                handle.count("synth", "retried")

    def _commit_draft(self, draft: DraftPair, task: SynthesisTask) -> str:
        record = SampleRecord(
            source_type=draft.source_type,
            format="Paired",
            code=draft.code,
            instruction=draft.instruction,
            lineage=draft.lineage,
            status="synthesized",
            meta={"task": task.to_dict(), **draft.strategy_metadata},
        )
        return self.store.store_record(record)

    def stage_validate(self, handle: RunHandle) -> None:
        work = [r for r in self.store.iter_latest() if r.status == "synthesized"]
        seeds = {r.record_id: r for r in self.store.iter_latest()}
        for record in work:
            self._validate_one(handle, record, seeds)
            handle.advance("validate", record.record_id)
            self._tick()

    def _validate_one(
        self, handle: RunHandle, record: SampleRecord, seeds: dict[str, SampleRecord]
    ) -> None:
        row = self.config.matrix[record.source_type]
        if row.validation_profile == "none":
            record.status = "validated"
            self.store.supersede(record)
            handle.count("validate", "accepted")
            return
        profile = self.config.profiles[row.validation_profile]
        task_dict = record.meta.get("task") or {}
        task = SynthesisTask(
            task_id=task_dict.get("task_id", record.record_id[:16]),
            strategy=task_dict.get("strategy", record.lineage.strategy),
            seed_record_ids=task_dict.get("seed_record_ids", record.lineage.parents),
            concept=task_dict.get("concept"),
            target_domain=task_dict.get("target_domain"),
            rng_seed=task_dict.get("rng_seed", 0),
            k=task_dict.get("k"),
            attempt=task_dict.get("attempt", 0),
        )
        current = record
        while True:
            result = execute(
                current.code,
                profile,
                store=self.store,
                created_by=f"validate:{current.record_id[:12]}",
            )
            if result.passed:
                old_id = current.record_id
                current.status = "validated"
                current.validation = result
                current.visual_refs = current.visual_refs or result.artifacts
                self.store.supersede(current)
                if current.record_id != old_id:
                    # attaching captured artifacts changes the content identity;
                    # retire the artifact-less original (new record first, so a
                    # kill between the two writes cannot lose the survivor)
                    stale = self.store.get(old_id)
                    stale.status = "dropped"
                    stale.meta = {**stale.meta, "replaced_by": current.record_id}
                    self.store.supersede(stale)
                handle.count("validate", "accepted")
                return
            decision = route_failure(task, result, self.config.max_retries)
            if decision.action == "drop":
                current.status = "dropped"
                current.validation = result
                self.store.supersede(current)
                handle.count("validate", "rejected")
                return
            task.attempt += 1
            task.feedback = decision.feedback
            handle.count("validate", "retried")
            can_resynth = task.strategy == "guided_evolution" and all(
                sid in seeds for sid in task.seed_record_ids
            )
            if not can_resynth:
                # strategies without a feedback slot just re-execute once more
                continue
            try:
                draft = run_task(self.gateway, self.config, task, seeds, decision.feedback)
            except MalformedGenerationError:
                continue
            # commit the replacement before retiring the failing candidate so
            # a kill between the two writes cannot lose the draft
            rid = self._commit_draft(draft, task)
            current.status = "dropped"
            current.validation = result
            self.store.supersede(current)
            current = self.store.get(rid)

    def stage_reward(self, handle: RunHandle) -> None:
        work = [r for r in self.store.iter_latest() if r.status == "validated"]
        for record in work:
            try:
                reward = score_sample(
                    self.gateway, record, self.config, task_id=record.record_id[:16]
                )
                record.reward = reward
                record.status = "rewarded"
                handle.count("reward", "accepted")
            except JudgeFormatError:
                record.judge_failed = True
                record.status = "rewarded"
                handle.count("reward", "rejected")
            self.store.supersede(record)
            handle.advance("reward", record.record_id)
            self._tick()

    def stage_export(self, handle: RunHandle) -> None:
        work = [r for r in self.store.iter_latest() if r.status == "rewarded"]
        result = apply_filter(work, self.config)
        for record in result.retained:
            record.status = "retained"
            self.store.supersede(record)
        for record in result.dropped:
            record.status = "dropped"
            self.store.supersede(record)
        for record in result.judge_failed:
            record.status = "dropped"
            self.store.supersede(record)
        handle.count("export", "accepted", len(result.retained))
        handle.count("export", "rejected", len(result.dropped))
        handle.count("export", "judge_failed", len(result.judge_failed))

        # the export files reflect the whole corpus, not just this run's
        # freshly rewarded records, so a rerun on a settled corpus is a no-op
        # instead of truncating them
        retained_all = sorted(
            (r for r in self.store.iter_latest() if r.status == "retained"),
            key=lambda r: r.record_id,
        )
        judged = sorted(
            (
                r
                for r in self.store.iter_latest()
                if r.status in ("retained", "dropped") and (r.reward or r.judge_failed)
            ),
            key=lambda r: r.record_id,
        )
        export_dir = self.store.root / "export"
        export_dir.mkdir(exist_ok=True)
        with (export_dir / "retained.jsonl").open("w", encoding="utf-8") as fh:
            for record in retained_all:
                fh.write(record.to_line() + "\n")
        with (export_dir / "reward_report.jsonl").open("w", encoding="utf-8") as fh:
            for record in judged:
                decision = (
                    "judge_failed"
                    if record.judge_failed
                    else ("retained" if record.status == "retained" else "dropped")
                )
                fh.write(
                    canonical_json(
                        {
                            "record_id": record.record_id,
                            "dims": record.reward.dims if record.reward else None,
                            "S": record.reward.to_dict()["S"] if record.reward else None,
                            "decision": decision,
                            "judge_role": record.reward.judge_role if record.reward else None,
                        }
                    )
                    + "\n"
                )
        self._tick()


def run_pipeline(
    config: PipelineConfig,
    gateway: Gateway,
    stages: list[str] | None = None,
    store: CorpusStore | None = None,
) -> dict:
    store = store or CorpusStore(Path(config.corpus_dir))
    try:
        return Pipeline(config, store, gateway).run(stages)
    except VizforgeError as exc:
        raise FatalStageError("pipeline", str(exc)) from exc
