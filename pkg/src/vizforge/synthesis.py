"""The four synthesis strategies and the routing-matrix task planner.

Every strategy call goes through the gateway and returns a DraftPair with
full lineage back to its seed record(s). Gateway output is parsed by exact
section markers; anything unparseable is an attempt failure, never a
silent acceptance.
"""

from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass, field
from typing import Optional

from .config import PipelineConfig
from .errors import (
    EdgeError,
    MalformedGenerationError,
    PlanningError,
    PreconditionError,
    SnippetError,
)
from .gateway import Gateway, GatewayRequest
from .hashing import content_hash
from .records import Lineage, SampleRecord, child_depth

logger = logging.getLogger(__name__)

PROBLEM_MARKER = "[Problem Description]"
CODE_MARKER = "[Code Solution]"

_FENCE_RE = re.compile(r"```(?:[a-zA-Z0-9_+-]*)\n(.*?)```", re.DOTALL)


@dataclass
class SynthesisTask:
    task_id: str
    strategy: str
    seed_record_ids: list[str]
    concept: Optional[str] = None
    target_domain: Optional[str] = None
    rng_seed: int = 0
    k: Optional[int] = None  # reverse instruction snippet length
    attempt: int = 0
    feedback: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "strategy": self.strategy,
            "seed_record_ids": self.seed_record_ids,
            "concept": self.concept,
            "target_domain": self.target_domain,
            "rng_seed": self.rng_seed,
            "k": self.k,
            "attempt": self.attempt,
        }


@dataclass
class DraftPair:
    instruction: str
    code: str
    lineage: Lineage
    source_type: str
    strategy_metadata: dict = field(default_factory=dict)


def parse_sections(text: str) -> tuple[str, str]:
    """Split a synthesis response on the exact section markers."""
    pi = text.find(PROBLEM_MARKER)
    ci = text.find(CODE_MARKER)
    if pi == -1 or ci == -1 or ci < pi:
        raise MalformedGenerationError(
            f"output missing required sections {PROBLEM_MARKER!r} / {CODE_MARKER!r}"
        )
    instruction = text[pi + len(PROBLEM_MARKER) : ci].strip()
    code_raw = text[ci + len(CODE_MARKER) :].strip()
    m = _FENCE_RE.search(code_raw)
    code = m.group(1).strip("\n") if m else code_raw
    if not instruction or not code:
        raise MalformedGenerationError("empty instruction or code section")
    return instruction, code


# ------------------------------------------------------------------- planning


def plan_tasks(config: PipelineConfig, records: list[SampleRecord]) -> list[SynthesisTask]:
    """Generate tasks only for (source_type, strategy) cells marked in config.

    Deterministic given config.seed: records are visited in record_id order
    and per-task randomness is derived from (seed, record_id, strategy).
    """
    tasks: list[SynthesisTask] = []
    cell_counts: dict[tuple[str, str], int] = {}
    for record in sorted(records, key=lambda r: r.record_id):
        row = config.matrix.get(record.source_type)
        if row is None:
            raise PlanningError(
                f"record {record.record_id} has source_type {record.source_type!r} "
                "not present in the routing matrix"
            )
        for strategy in row.strategies:
            if row.quota is not None:
                if cell_counts.get((record.source_type, strategy), 0) >= row.quota:
                    continue
            task = _plan_one(config, record, strategy)
            if task is None:
                continue
            cell_counts[(record.source_type, strategy)] = (
                cell_counts.get((record.source_type, strategy), 0) + 1
            )
            tasks.append(task)
    return tasks


def _task_rng(config: PipelineConfig, record: SampleRecord, strategy: str) -> random.Random:
    return random.Random(f"{config.seed}:{record.record_id}:{strategy}")


def _plan_one(
    config: PipelineConfig, record: SampleRecord, strategy: str
) -> Optional[SynthesisTask]:
    rng = _task_rng(config, record, strategy)
    concept = None
    target = None
    k = None
    if strategy == "reverse_instruction":
        if record.format != "CodeOnly":
            return None
        n_lines = sum(1 for ln in record.code.splitlines() if ln.strip())
        lo, hi = config.reverse_k_range
        if n_lines < lo:
            k = n_lines
        else:
            k = rng.randint(lo, min(hi, n_lines))
        if k < 1:
            return None
    elif record.format != "Paired":
        return None

    if strategy == "guided_evolution":
        pool = config.concepts.get(record.source_type) or []
        if not pool:
            return None
        concept = rng.choice(sorted(pool))
    elif strategy == "bidirectional_translation":
        targets = sorted(
            {b for a, b in config.translation_edges if a == record.source_type}
            | {a for a, b in config.translation_edges if b == record.source_type}
        )
        if not targets:
            return None
        target = rng.choice(targets)

    task_id = content_hash(
        {
            "seed": config.seed,
            "record": record.record_id,
            "strategy": strategy,
            "concept": concept,
            "target": target,
            "k": k,
        }
    )[:16]
    return SynthesisTask(
        task_id=task_id,
        strategy=strategy,
        seed_record_ids=[record.record_id],
        concept=concept,
        target_domain=target,
        rng_seed=rng.randint(0, 2**31 - 1),
        k=k,
    )


# ----------------------------------------------------------------- strategies


def evolve(
    gateway: Gateway,
    seed: SampleRecord,
    concept: str,
    feedback: Optional[str] = None,
    task_id: str = "",
) -> DraftPair:
    if seed.format != "Paired":
        raise PreconditionError("guided evolution needs a Paired seed")
    if not concept:
        raise PreconditionError("guided evolution needs a non-empty concept")
    response = gateway.complete(
        GatewayRequest(
            role="synthesizer",
            template_id="evolve",
            variables={
                "instruction": seed.instruction,
                "code": seed.code,
                "concept": concept,
                "feedback": feedback or "",
            },
        ),
        task_id=task_id,
    )
    instruction, code = parse_sections(response)
    return DraftPair(
        instruction=instruction,
        code=code,
        lineage=Lineage(
            parents=[seed.record_id],
            strategy="guided_evolution",
            concept=concept,
            generation_depth=child_depth([seed.lineage.generation_depth]),
        ),
        source_type=seed.source_type,
    )


def recontextualize(gateway: Gateway, seed: SampleRecord, task_id: str = "") -> DraftPair:
    if seed.format != "Paired":
        raise PreconditionError("re-contextualization needs a Paired seed")
    response = gateway.complete(
        GatewayRequest(
            role="synthesizer",
            template_id="recontextualize",
            variables={"instruction": seed.instruction, "code": seed.code},
        ),
        task_id=task_id,
    )
    instruction, code = parse_sections(response)
    if code != seed.code and code == seed.code.rstrip("\n"):
        # fence extraction drops the trailing newline; not a real modification
        code = seed.code
    if code != seed.code:
        # defining contract of the strategy: only the instruction changes
        logger.warning(
            "recontextualize: gateway modified the code for seed %s; "
            "overwriting with the original",
            seed.record_id[:12],
        )
        code = seed.code
    if instruction == seed.instruction:
        raise MalformedGenerationError("re-contextualized instruction is a no-op")
    return DraftPair(
        instruction=instruction,
        code=code,
        lineage=Lineage(
            parents=[seed.record_id],
            strategy="recontextualization",
            generation_depth=child_depth([seed.lineage.generation_depth]),
        ),
        source_type=seed.source_type,
    )


def sample_snippet(code: str, k: int, rng_seed: int) -> tuple[str, tuple[int, int]]:
    """Draw a contiguous run of k non-blank lines; returns (text, line span)."""
    if k < 1:
        raise PreconditionError("snippet length k must be >= 1")
    numbered = [(i + 1, ln) for i, ln in enumerate(code.splitlines()) if ln.strip()]
    if k > len(numbered):
        raise SnippetError(f"k={k} exceeds the {len(numbered)} non-blank lines available")
    start = random.Random(rng_seed).randint(0, len(numbered) - k)
    chosen = numbered[start : start + k]
    return "\n".join(ln for _, ln in chosen), (chosen[0][0], chosen[-1][0])


def reverse_instruct(
    gateway: Gateway,
    ref_record: SampleRecord,
    k: int,
    rng_seed: int,
    use_ref_context: bool = True,
    task_id: str = "",
) -> DraftPair:
    snippet, span = sample_snippet(ref_record.code, k, rng_seed)
    inferred = gateway.complete(
        GatewayRequest(
            role="synthesizer",
            template_id="reverse_instruction",
            variables={"snippet": snippet},
        ),
        task_id=task_id,
    ).strip()
    if not inferred:
        raise MalformedGenerationError("reverse instruction step returned empty text")
    response = gateway.complete(
        GatewayRequest(
            role="synthesizer",
            template_id="reverse_code",
            variables={
                "instruction": inferred,
                "ref_context": ref_record.code if use_ref_context else "",
            },
        ),
        task_id=task_id,
    )
    _, code = parse_sections(response)
    return DraftPair(
        instruction=inferred,
        code=code,
        lineage=Lineage(
            parents=[ref_record.record_id],
            strategy="reverse_instruction",
            generation_depth=child_depth([ref_record.lineage.generation_depth]),
        ),
        source_type=ref_record.source_type,
        strategy_metadata={"snippet_span": list(span), "k": k},
    )


def translate(
    gateway: Gateway,
    seed: SampleRecord,
    target_domain: str,
    edges: list[tuple[str, str]],
    task_id: str = "",
) -> DraftPair:
    if seed.format != "Paired":
        raise PreconditionError("translation needs a Paired seed")
    pair = (seed.source_type, target_domain)
    # edges are bidirectional: a configured (A, B) also admits (B, A)
    if pair not in edges and (pair[1], pair[0]) not in edges:
        raise EdgeError(
            f"translation edge {seed.source_type} -> {target_domain} is not configured"
        )
    translated = gateway.complete(
        GatewayRequest(
            role="synthesizer",
            template_id="translate_instruction",
            variables={"instruction": seed.instruction, "target_domain": target_domain},
        ),
        task_id=task_id,
    ).strip()
    if not translated:
        raise MalformedGenerationError("instruction translation returned empty text")
    response = gateway.complete(
        GatewayRequest(
            role="synthesizer",
            template_id="translate_code",
            variables={
                "instruction": translated,
                "code": seed.code,
                "target_domain": target_domain,
            },
        ),
        task_id=task_id,
    )
    _, code = parse_sections(response)
    return DraftPair(
        instruction=translated,
        code=code,
        lineage=Lineage(
            parents=[seed.record_id],
            strategy="bidirectional_translation",
            generation_depth=child_depth([seed.lineage.generation_depth]),
        ),
        source_type=target_domain,
        strategy_metadata={"translated_from": seed.source_type},
    )


def run_task(
    gateway: Gateway,
    config: PipelineConfig,
    task: SynthesisTask,
    seeds: dict[str, SampleRecord],
    feedback: Optional[str] = None,
) -> DraftPair:
    seed = seeds[task.seed_record_ids[0]]
    if task.strategy == "guided_evolution":
        return evolve(gateway, seed, task.concept or "", feedback, task_id=task.task_id)
    if task.strategy == "recontextualization":
        return recontextualize(gateway, seed, task_id=task.task_id)
    if task.strategy == "reverse_instruction":
        return reverse_instruct(
            gateway,
            seed,
            task.k or 1,
            task.rng_seed,
            use_ref_context=config.reverse_use_ref_context,
            task_id=task.task_id,
        )
    if task.strategy == "bidirectional_translation":
        return translate(
            gateway,
            seed,
            task.target_domain or "",
            config.translation_edges,
            task_id=task.task_id,
        )
    raise PreconditionError(f"unknown strategy {task.strategy!r}")
