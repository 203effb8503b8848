"""Dynamic-visualization benchmark harness.

Each task pairs an instruction with a reference program for one of two
engines. Generated code is gated on executability; only executable outputs
ever reach the judge (cost guard). overall = s_exec * (s_sim + s_align
[+ s_faith when a human faithfulness score exists]).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .config import PipelineConfig
from .errors import EmptyReportError, JudgeFormatError, PreconditionError
from .gateway import Gateway, GatewayRequest
from .hashing import canonical_json
from .records import ValidationResult
from .sandbox import execute
from .store import CorpusStore
from .synthesis import _FENCE_RE

logger = logging.getLogger(__name__)

ENGINES = ("manim", "wolfram")

ENGINE_PROFILES = {"manim": "manim-render", "wolfram": "wolfram-eval"}

BENCH_SCHEMA = {
    "code_similarity": {"score": "int:1:5", "reasoning": "str"},
    "instruction_alignment": {"score": "int:1:5", "reasoning": "str"},
}


@dataclass
class BenchTask:
    task_id: str
    engine: str
    instruction: str
    reference_code: str

    @property
    def env_profile_id(self) -> str:
        return ENGINE_PROFILES[self.engine]

    @classmethod
    def from_dict(cls, d: dict) -> "BenchTask":
        if d["engine"] not in ENGINES:
            raise PreconditionError(f"unknown engine {d['engine']!r}")
        return cls(
            task_id=d["task_id"],
            engine=d["engine"],
            instruction=d["instruction"],
            reference_code=d["reference_code"],
        )


@dataclass
class BenchRecord:
    task_id: str
    engine: str
    generated_code: Optional[str]
    s_exec: int
    reason: Optional[str] = None  # e.g. "no_code" when extraction failed
    validation: Optional[ValidationResult] = None
    artifacts: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "engine": self.engine,
            "generated_code": self.generated_code,
            "s_exec": self.s_exec,
            "reason": self.reason,
            "validation": self.validation.to_dict() if self.validation else None,
            "artifacts": self.artifacts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchRecord":
        return cls(
            task_id=d["task_id"],
            engine=d["engine"],
            generated_code=d.get("generated_code"),
            s_exec=int(d["s_exec"]),
            reason=d.get("reason"),
            validation=(
                ValidationResult.from_dict(d["validation"]) if d.get("validation") else None
            ),
            artifacts=list(d.get("artifacts", [])),
        )


@dataclass
class BenchScore:
    task_id: str
    engine: str
    s_exec: int
    s_sim: Optional[int] = None
    s_align: Optional[int] = None
    s_faith: Optional[int] = None
    faith_included: bool = False
    unscored: bool = False

    @property
    def overall(self) -> int:
        if self.s_exec == 0:
            return 0
        total = (self.s_sim or 0) + (self.s_align or 0)
        if self.faith_included:
            total += self.s_faith or 0
        return total

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "engine": self.engine,
            "s_exec": self.s_exec,
            "s_sim": self.s_sim,
            "s_align": self.s_align,
            "s_faith": self.s_faith,
            "faith_included": self.faith_included,
            "overall": self.overall,
            "unscored": self.unscored,
        }


def extract_code(response: str) -> Optional[str]:
    """Last fenced code block wins; None when there is no block at all."""
    blocks = _FENCE_RE.findall(response)
    if not blocks:
        return None
    code = blocks[-1].strip("\n")
    return code or None


def load_tasks(path: Path | str) -> list[BenchTask]:
    tasks = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                tasks.append(BenchTask.from_dict(json.loads(line)))
    return tasks


def run_suite(
    gateway: Gateway,
    tasks: list[BenchTask],
    config: PipelineConfig,
    store: CorpusStore,
    records_path: Path,
) -> list[BenchRecord]:
    """Generate + execute every task; incremental persistence makes it resumable."""
    if not tasks:
        raise PreconditionError("task set is empty")
    done: dict[str, BenchRecord] = {}
    if records_path.exists():
        with records_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = BenchRecord.from_dict(json.loads(line))
                    done[rec.task_id] = rec

    records = []
    with records_path.open("a", encoding="utf-8") as out:
        for task in tasks:
            if task.task_id in done:
                records.append(done[task.task_id])
                continue
            try:
                record = _run_one(gateway, task, config, store)
            except Exception as exc:  # task-level errors never abort the suite
                logger.error("task %s failed: %s", task.task_id, exc)
                record = BenchRecord(
                    task_id=task.task_id,
                    engine=task.engine,
                    generated_code=None,
                    s_exec=0,
                    reason=f"error: {exc}",
                )
            out.write(canonical_json(record.to_dict()) + "\n")
            out.flush()
            records.append(record)
    return records


def _run_one(
    gateway: Gateway, task: BenchTask, config: PipelineConfig, store: CorpusStore
) -> BenchRecord:
    response = gateway.complete(
        GatewayRequest(
            role="synthesizer",
            template_id="bench_generate",
            variables={"instruction": task.instruction, "engine": task.engine},
        ),
        task_id=task.task_id,
    )
    code = extract_code(response)
    if code is None:
        return BenchRecord(
            task_id=task.task_id,
            engine=task.engine,
            generated_code=None,
            s_exec=0,
            reason="no_code",
        )
    profile = config.profiles[task.env_profile_id]
    result = execute(code, profile, store=store, created_by=f"bench:{task.task_id}")
    return BenchRecord(
        task_id=task.task_id,
        engine=task.engine,
        generated_code=code,
        s_exec=1 if result.passed else 0,
        validation=result,
        artifacts=result.artifacts,
    )


def score_record(
    gateway: Gateway,
    task: BenchTask,
    record: BenchRecord,
    faith_score: Optional[int] = None,
) -> BenchScore:
    """Judge one executed record; never issues a judge call when s_exec = 0."""
    if faith_score is not None and not (
        isinstance(faith_score, int) and 1 <= faith_score <= 5
    ):
        raise PreconditionError(f"faith score {faith_score!r} not an integer in [1,5]")
    if record.s_exec == 0:
        return BenchScore(task_id=task.task_id, engine=task.engine, s_exec=0)
    request = GatewayRequest(
        role="text_judge",
        template_id="judge_bench",
        variables={
            "instruction": task.instruction,
            "reference_code": task.reference_code,
            "generated_code": record.generated_code or "",
        },
    )
    try:
        # bench judging honors the strict single-line contract
        obj = gateway.judge_structured(request, BENCH_SCHEMA, strict_mode=True, task_id=task.task_id)
    except JudgeFormatError:
        return BenchScore(
            task_id=task.task_id, engine=task.engine, s_exec=1, unscored=True
        )
    return BenchScore(
        task_id=task.task_id,
        engine=task.engine,
        s_exec=1,
        s_sim=obj["code_similarity"]["score"],
        s_align=obj["instruction_alignment"]["score"],
        s_faith=faith_score,
        faith_included=faith_score is not None,
    )


def aggregate_report(scores: list[BenchScore]) -> dict:
    """Per-engine means, executability rate, faith coverage, unscored counts.

    Means with and without the faith term come from disjoint populations;
    they are never mixed into one number.
    """
    scored = [s for s in scores if not s.unscored]
    if not scored:
        raise EmptyReportError("no scored records to aggregate")

    report: dict = {"engines": {}, "unscored": sum(1 for s in scores if s.unscored)}
    for engine in ENGINES:
        group = [s for s in scored if s.engine == engine]
        if not group:
            continue
        with_faith = [s for s in group if s.s_exec == 1 and s.faith_included]
        without_faith = [s for s in group if not (s.s_exec == 1 and s.faith_included)]
        report["engines"][engine] = {
            "count": len(group),
            "exec_rate": float(Fraction(sum(s.s_exec for s in group), len(group))),
            "mean_overall": _mean([s.overall for s in without_faith]),
            "mean_overall_with_faith": _mean([s.overall for s in with_faith]),
            "faith_coverage": len(with_faith),
        }
    return report


def _mean(values: list[int]) -> Optional[float]:
    return float(Fraction(sum(values), len(values))) if values else None


def format_report(report: dict) -> str:
    lines = [
        f"{'engine':<10} {'n':>4} {'exec%':>7} {'mean':>8} {'mean+faith':>11} {'faith n':>8}"
    ]
    for engine, row in report["engines"].items():
        mean = "-" if row["mean_overall"] is None else f"{row['mean_overall']:.2f}"
        mean_f = (
            "-"
            if row["mean_overall_with_faith"] is None
            else f"{row['mean_overall_with_faith']:.2f}"
        )
        lines.append(
            f"{engine:<10} {row['count']:>4} {row['exec_rate'] * 100:>6.1f}% "
            f"{mean:>8} {mean_f:>11} {row['faith_coverage']:>8}"
        )
    lines.append(f"unscored: {report['unscored']}")
    return "\n".join(lines)
