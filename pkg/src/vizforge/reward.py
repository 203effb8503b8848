"""Reward judging: four-dimension rubric, mean score S, retention filter.

S is always recomputed locally from the four integer dimensions in exact
rational arithmetic (quarter-integer grid), never trusted from judge text.
The binary edit verdict is likewise recomputed from its three dimensions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .config import PipelineConfig
from .errors import JudgeFormatError, PreconditionError
from .gateway import Gateway, GatewayRequest
from .records import EDIT_DIMS, REWARD_DIMS, RewardScore, SampleRecord

logger = logging.getLogger(__name__)

# prompt heading -> canonical dimension id
JUDGE_KEY_MAP = {
    "Task Completion": "task_completion",
    "Solution Coherence & Code Quality": "solution_coherence_code_quality",
    "Visual Clarity": "visual_clarity",
    "Task Relevance": "task_relevance",
}

EDIT_KEY_MAP = {
    "Instruction Adherence Score": "instruction_adherence",
    "Edit Quality & Realism Score": "edit_quality_realism",
    "Preservation of Unrelated Areas Score": "preservation",
}

REWARD_SCHEMA = {
    "Chain of Thought": "str",
    **{k: "int:1:5" for k in JUDGE_KEY_MAP},
}

EDIT_SCHEMA = {
    "Chain of Thought": "str",
    **{k: "int:1:5" for k in EDIT_KEY_MAP},
    "Final Result": "int:0:1",
}


def mean_score(dims: dict[str, int]) -> Fraction:
    """Exact arithmetic mean of the four dimension scores."""
    if set(dims) != set(REWARD_DIMS):
        raise PreconditionError(f"expected dims {REWARD_DIMS}, got {sorted(dims)}")
    return Fraction(sum(dims.values()), len(REWARD_DIMS))


def edit_final(dims: dict[str, int]) -> int:
    """1 iff every dimension scores 3 or higher."""
    if set(dims) != set(EDIT_DIMS):
        raise PreconditionError(f"expected dims {EDIT_DIMS}, got {sorted(dims)}")
    return 1 if min(dims.values()) >= 3 else 0


@dataclass
class EditVerdict:
    dims: dict[str, int]
    final: int
    chain_of_thought: str = ""


def score_sample(
    gateway: Gateway,
    record: SampleRecord,
    config: PipelineConfig,
    strict_mode: bool = False,
    task_id: str = "",
) -> RewardScore:
    """Judge one record; raises JudgeFormatError on persistent bad output."""
    if not record.code:
        raise PreconditionError("record has no code to judge")
    row = config.matrix.get(record.source_type)
    role = row.judge_role if row else "text_judge"
    has_visual = bool(record.visual_refs)
    if role == "vision_judge" and not has_visual:
        # vision-judged source but nothing rendered yet: fall back to text
        role = "text_judge"
    request = GatewayRequest(
        role=role,
        template_id="judge_reward_vision" if role == "vision_judge" else "judge_reward_text",
        variables={"instruction": record.instruction or "", "code": record.code},
        attachments=list(record.visual_refs) if role == "vision_judge" else [],
    )
    obj = gateway.judge_structured(request, REWARD_SCHEMA, strict_mode, task_id=task_id)
    dims = {canon: obj[heading] for heading, canon in JUDGE_KEY_MAP.items()}
    return RewardScore(
        dims=dims,
        S=mean_score(dims),
        chain_of_thought=obj.get("Chain of Thought", ""),
        judge_role=role,
    )


def judge_edit(
    gateway: Gateway,
    before_visual: str,
    after_visual: str,
    instruction: str,
    strict_mode: bool = False,
    task_id: str = "",
) -> EditVerdict:
    request = GatewayRequest(
        role="vision_judge",
        template_id="judge_edit",
        variables={"instruction": instruction},
        attachments=[before_visual, after_visual],
    )
    obj = gateway.judge_structured(request, EDIT_SCHEMA, strict_mode, task_id=task_id)
    dims = {canon: obj[heading] for heading, canon in EDIT_KEY_MAP.items()}
    final = edit_final(dims)
    if obj["Final Result"] != final:
        logger.warning(
            "judge's own final verdict %s disagrees with the rule (%s); rule wins",
            obj["Final Result"],
            final,
        )
    return EditVerdict(dims=dims, final=final, chain_of_thought=obj.get("Chain of Thought", ""))


@dataclass
class FilterResult:
    retained: list[SampleRecord] = field(default_factory=list)
    dropped: list[SampleRecord] = field(default_factory=list)
    judge_failed: list[SampleRecord] = field(default_factory=list)


def validation_gate(record: SampleRecord, config: PipelineConfig) -> bool:
    """True if the record passed execution or its source has no backend."""
    row = config.matrix.get(record.source_type)
    if row is None or row.validation_profile == "none":
        return True
    return record.validation is not None and record.validation.passed


def apply_filter(
    records: list[SampleRecord],
    config: PipelineConfig,
    threshold: Optional[Fraction] = None,
) -> FilterResult:
    """Exact, exhaustive partition into retained / dropped / judge_failed."""
    result = FilterResult()
    for record in records:
        if record.judge_failed:
            result.judge_failed.append(record)
            continue
        if record.reward is None:
            raise PreconditionError(
                f"record {record.record_id} is neither rewarded nor judge_failed"
            )
        tau = threshold if threshold is not None else config.threshold_for(record.source_type)
        if record.reward.S >= tau and validation_gate(record, config):
            result.retained.append(record)
        else:
            result.dropped.append(record)
    return result
