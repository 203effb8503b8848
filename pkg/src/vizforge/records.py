"""Core record types: samples, lineage, validation outcomes, reward scores.

A SampleRecord is one instruction-code(-visual) unit. Its identity
(record_id) is a pure function of (instruction, code, visual_refs,
source_type); everything else (status, reward, validation, lineage) is
carried alongside and versioned through append-only revisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import RejectedRecordError
from .hashing import canonical_json, content_hash

SCHEMA_VERSION = 1

SOURCE_TYPES = (
    "matplotlib",
    "charts",
    "algorithm",
    "mathematica",
    "animation",
    "scientific-pl",
    "svg",
    "webui",
    "general-artifact",
    "scientific-demo",
)

STRATEGIES = (
    "guided_evolution",
    "recontextualization",
    "reverse_instruction",
    "bidirectional_translation",
    "none",
)

FORMATS = ("Paired", "CodeOnly")

STATUSES = (
    "raw",
    "decomposed",
    "synthesized",
    "validated",
    "rewarded",
    "retained",
    "dropped",
)

MEDIA_KINDS = ("image", "video", "html_snapshot", "log", "test_report")

REWARD_DIMS = (
    "task_completion",
    "solution_coherence_code_quality",
    "visual_clarity",
    "task_relevance",
)

EDIT_DIMS = ("instruction_adherence", "edit_quality_realism", "preservation")


def fraction_to_str(value: Fraction) -> str:
    # Quarter-integer grid: two decimal places are always exact.
    return f"{float(value):.2f}"


def fraction_from_str(text: str) -> Fraction:
    return Fraction(text)


@dataclass
class Lineage:
    parents: list[str] = field(default_factory=list)
    strategy: str = "none"
    concept: Optional[str] = None
    generation_depth: int = 0

    def check(self) -> list[str]:
        problems = []
        if self.strategy not in STRATEGIES:
            problems.append(f"lineage.strategy: unknown value {self.strategy!r}")
        if (self.strategy == "none") != (not self.parents):
            problems.append("lineage: strategy 'none' iff parents empty")
        if (not self.parents) != (self.generation_depth == 0):
            problems.append("lineage: parents empty iff generation_depth == 0")
        if self.generation_depth < 0:
            problems.append("lineage.generation_depth: negative")
        return problems

    def to_dict(self) -> dict:
        return {
            "parents": list(self.parents),
            "strategy": self.strategy,
            "concept": self.concept,
            "generation_depth": self.generation_depth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Lineage":
        return cls(
            parents=list(d.get("parents", [])),
            strategy=d.get("strategy", "none"),
            concept=d.get("concept"),
            generation_depth=int(d.get("generation_depth", 0)),
        )


@dataclass
class ValidationResult:
    passed: bool
    termination_reason: str  # exit | timeout | resource_cap | spawn_failure
    exit_code: Optional[int] = None
    duration: float = 0.0
    stdout_tail: str = ""
    stderr_tail: str = ""
    artifacts: list[str] = field(default_factory=list)
    test_summary: Optional[dict] = None  # {"passed": int, "failed": int}

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "termination_reason": self.termination_reason,
            "exit_code": self.exit_code,
            "duration": self.duration,
            "stdout_tail": self.stdout_tail,
            "stderr_tail": self.stderr_tail,
            "artifacts": list(self.artifacts),
            "test_summary": self.test_summary,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationResult":
        return cls(
            passed=bool(d["passed"]),
            termination_reason=d["termination_reason"],
            exit_code=d.get("exit_code"),
            duration=float(d.get("duration", 0.0)),
            stdout_tail=d.get("stdout_tail", ""),
            stderr_tail=d.get("stderr_tail", ""),
            artifacts=list(d.get("artifacts", [])),
            test_summary=d.get("test_summary"),
        )


@dataclass
class RewardScore:
    dims: dict[str, int]
    S: Fraction
    chain_of_thought: str = ""
    judge_role: str = "text_judge"

    def to_dict(self) -> dict:
        return {
            "dims": dict(self.dims),
            "S": fraction_to_str(self.S),
            "chain_of_thought": self.chain_of_thought,
            "judge_role": self.judge_role,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RewardScore":
        return cls(
            dims={k: int(v) for k, v in d["dims"].items()},
            S=fraction_from_str(d["S"]),
            chain_of_thought=d.get("chain_of_thought", ""),
            judge_role=d.get("judge_role", "text_judge"),
        )


@dataclass
class SampleRecord:
    source_type: str
    format: str  # Paired | CodeOnly
    code: str
    instruction: Optional[str] = None
    visual_refs: list[str] = field(default_factory=list)
    language_tag: str = ""
    lineage: Lineage = field(default_factory=Lineage)
    status: str = "raw"
    reward: Optional[RewardScore] = None
    validation: Optional[ValidationResult] = None
    judge_failed: bool = False
    revision: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def record_id(self) -> str:
        return content_hash(
            {
                "instruction": self.instruction,
                "code": self.code,
                "visual_refs": list(self.visual_refs),
                "source_type": self.source_type,
            }
        )

    def check(self) -> list[str]:
        problems = []
        if self.source_type not in SOURCE_TYPES:
            problems.append(f"source_type: unknown value {self.source_type!r}")
        if self.format not in FORMATS:
            problems.append(f"format: unknown value {self.format!r}")
        if not self.code:
            problems.append("code: empty")
        if self.format == "Paired" and not self.instruction:
            problems.append("instruction: required for Paired records")
        if self.format == "CodeOnly" and self.instruction is not None:
            problems.append("instruction: must be absent for CodeOnly records")
        if self.status not in STATUSES:
            problems.append(f"status: unknown value {self.status!r}")
        if self.status == "retained" and self.reward is None:
            problems.append("status: retained requires a reward score")
        if self.reward is not None:
            for k, v in self.reward.dims.items():
                if not (isinstance(v, int) and 1 <= v <= 5):
                    problems.append(f"reward.dims[{k}]: {v!r} not an integer in [1,5]")
        problems.extend(self.lineage.check())
        return problems

    def validate(self) -> None:
        problems = self.check()
        if problems:
            raise RejectedRecordError(
                "record rejected: " + "; ".join(problems),
                fields={p.split(":")[0]: p for p in problems},
            )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "record_id": self.record_id,
            "source_type": self.source_type,
            "format": self.format,
            "instruction": self.instruction,
            "code": self.code,
            "visual_refs": list(self.visual_refs),
            "language_tag": self.language_tag,
            "lineage": self.lineage.to_dict(),
            "status": self.status,
            "reward": self.reward.to_dict() if self.reward else None,
            "validation": self.validation.to_dict() if self.validation else None,
            "judge_failed": self.judge_failed,
            "revision": self.revision,
            "meta": self.meta,
        }

    def to_line(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SampleRecord":
        return cls(
            source_type=d["source_type"],
            format=d["format"],
            code=d["code"],
            instruction=d.get("instruction"),
            visual_refs=list(d.get("visual_refs", [])),
            language_tag=d.get("language_tag", ""),
            lineage=Lineage.from_dict(d.get("lineage", {})),
            status=d.get("status", "raw"),
            reward=RewardScore.from_dict(d["reward"]) if d.get("reward") else None,
            validation=(
                ValidationResult.from_dict(d["validation"]) if d.get("validation") else None
            ),
            judge_failed=bool(d.get("judge_failed", False)),
            revision=int(d.get("revision", 0)),
            meta=dict(d.get("meta", {})),
        )


def child_depth(parent_depths: list[int]) -> int:
    """generation_depth of a synthesized record: 1 + deepest parent."""
    return 1 + max(parent_depths) if parent_depths else 0
