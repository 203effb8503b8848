"""Pipeline configuration: the per-source routing matrix, profiles, knobs.

The config file is YAML (JSON is a subset). Its heart is the routing
matrix: one row per source type giving the validation backend, the judge
role, and the set of synthesis strategies allowed for that source.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigError
from .hashing import content_hash
from .records import SOURCE_TYPES, STRATEGIES

VALIDATION_PROFILES = (
    "python-viz",
    "manim-render",
    "wolfram-eval",
    "web-render",
    "test-runner",
    "none",
)

JUDGE_ROLES = ("vision_judge", "text_judge")

# Default routing, one row per source type:
# (validation profile, judge role, allowed strategies)
DEFAULT_MATRIX = {
    "matplotlib": ("python-viz", "vision_judge", ["guided_evolution", "recontextualization"]),
    "charts": ("python-viz", "vision_judge", ["guided_evolution", "recontextualization"]),
    "algorithm": ("test-runner", "vision_judge", ["guided_evolution"]),
    "mathematica": (
        "wolfram-eval",
        "text_judge",
        ["guided_evolution", "reverse_instruction", "bidirectional_translation"],
    ),
    "animation": (
        "manim-render",
        "vision_judge",
        ["recontextualization", "bidirectional_translation"],
    ),
    "scientific-pl": (
        "none",
        "text_judge",
        ["guided_evolution", "recontextualization", "reverse_instruction"],
    ),
    "svg": ("none", "vision_judge", ["recontextualization"]),
    "webui": ("web-render", "vision_judge", ["guided_evolution"]),
    "general-artifact": (
        "web-render",
        "vision_judge",
        ["guided_evolution", "recontextualization"],
    ),
    "scientific-demo": ("web-render", "vision_judge", ["recontextualization"]),
}

# Translation synergies enabled out of the box (each edge works both ways).
DEFAULT_TRANSLATION_EDGES = [
    ("animation", "mathematica"),
    ("scientific-pl", "mathematica"),
    ("scientific-pl", "animation"),
]

DEFAULT_TIMEOUTS = {
    "python-viz": 60.0,
    "manim-render": 300.0,
    "wolfram-eval": 300.0,
    "web-render": 300.0,
    "test-runner": 60.0,
}


@dataclass
class MatrixRow:
    source_type: str
    validation_profile: str
    judge_role: str
    strategies: list[str]
    quota: Optional[int] = None  # max tasks per (source, strategy) cell
    threshold: Optional[Fraction] = None  # per-source retention override


@dataclass
class SourceConfig:
    source_type: str
    locator: str
    field_map: dict = field(default_factory=lambda: {"instruction": "instruction", "code": "code", "visual": "visual"})


@dataclass
class ProfileConfig:
    profile_id: str
    command: list[str] = field(default_factory=list)  # {main}/{workspace} placeholders
    timeout: float = 60.0
    grace: float = 5.0
    memory_mb: int = 2048
    cpu_seconds: Optional[int] = None
    artifact_globs: list[str] = field(default_factory=list)
    main_filename: str = "main.py"
    requires_artifact: bool = False


@dataclass
class DecomposeConfig:
    base_class_names: list[str] = field(default_factory=lambda: ["Scene", "ThreeDScene"])
    entry_method_name: str = "construct"
    import_denylist: list[str] = field(default_factory=lambda: ["manim_imports_ext*"])
    play_invocation_names: list[str] = field(default_factory=lambda: ["play"])
    language_tags: list[str] = field(default_factory=lambda: ["python-manim"])
    template_id: str = "unit_default"


@dataclass
class PipelineConfig:
    corpus_dir: str
    templates_dir: Optional[str] = None  # None -> packaged defaults
    threshold: Fraction = Fraction(4)
    max_retries: int = 3
    max_parallel: int = 1
    seed: int = 0
    reverse_k_range: tuple[int, int] = (10, 40)
    reverse_use_ref_context: bool = True
    sources: list[SourceConfig] = field(default_factory=list)
    matrix: dict[str, MatrixRow] = field(default_factory=dict)
    translation_edges: list[tuple[str, str]] = field(default_factory=lambda: list(DEFAULT_TRANSLATION_EDGES))
    concepts: dict[str, list[str]] = field(default_factory=dict)
    profiles: dict[str, ProfileConfig] = field(default_factory=dict)
    decompose: DecomposeConfig = field(default_factory=DecomposeConfig)
    annotators: list[str] = field(default_factory=list)
    gateway_retries: int = 2
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return content_hash(self.raw)

    def threshold_for(self, source_type: str) -> Fraction:
        row = self.matrix.get(source_type)
        if row and row.threshold is not None:
            return row.threshold
        return self.threshold


def default_matrix() -> dict[str, MatrixRow]:
    return {
        st: MatrixRow(st, validation, judge, list(strategies))
        for st, (validation, judge, strategies) in DEFAULT_MATRIX.items()
    }


def default_profiles() -> dict[str, ProfileConfig]:
    profiles = {}
    for pid, timeout in DEFAULT_TIMEOUTS.items():
        profiles[pid] = ProfileConfig(
            profile_id=pid,
            command=["{python}", "{main}"],
            timeout=timeout,
            artifact_globs=["*.png", "*.jpg", "*.svg", "*.mp4", "*.gif", "*.html"],
            requires_artifact=pid in ("python-viz", "manim-render", "web-render"),
        )
    profiles["none"] = ProfileConfig(profile_id="none", timeout=1.0)
    return profiles


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"missing required key {path}.{key}", keys=[f"{path}.{key}"])
    return d[key]


def parse_config(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping", keys=["<root>"])
    bad: list[str] = []

    corpus_dir = _require(data, "corpus_dir", "config")

    matrix = default_matrix()
    for st, row in (data.get("matrix") or {}).items():
        if st not in SOURCE_TYPES:
            bad.append(f"matrix.{st}")
            continue
        validation = row.get("validation", "none")
        judge = row.get("reward", "text_judge")
        strategies = row.get("strategies", [])
        if validation not in VALIDATION_PROFILES:
            bad.append(f"matrix.{st}.validation")
        if judge not in JUDGE_ROLES:
            bad.append(f"matrix.{st}.reward")
        for s in strategies:
            if s not in STRATEGIES or s == "none":
                bad.append(f"matrix.{st}.strategies.{s}")
        matrix[st] = MatrixRow(
            source_type=st,
            validation_profile=validation,
            judge_role=judge,
            strategies=list(strategies),
            quota=row.get("quota"),
            threshold=Fraction(str(row["threshold"])) if "threshold" in row else None,
        )

    sources = []
    for i, src in enumerate(data.get("sources") or []):
        st = src.get("source_type")
        if st not in SOURCE_TYPES:
            bad.append(f"sources[{i}].source_type")
            continue
        field_map = src.get("field_map") or {"instruction": "instruction", "code": "code", "visual": "visual"}
        if "code" not in field_map:
            bad.append(f"sources[{i}].field_map.code")
        sources.append(
            SourceConfig(source_type=st, locator=_require(src, "locator", f"sources[{i}]"), field_map=field_map)
        )

    profiles = default_profiles()
    for pid, p in (data.get("profiles") or {}).items():
        base = profiles.get(pid, ProfileConfig(profile_id=pid))
        profiles[pid] = ProfileConfig(
            profile_id=pid,
            command=p.get("command", base.command),
            timeout=float(p.get("timeout", base.timeout)),
            grace=float(p.get("grace", base.grace)),
            memory_mb=int(p.get("memory_mb", base.memory_mb)),
            cpu_seconds=p.get("cpu_seconds", base.cpu_seconds),
            artifact_globs=p.get("artifact_globs", base.artifact_globs),
            main_filename=p.get("main_filename", base.main_filename),
            requires_artifact=bool(p.get("requires_artifact", base.requires_artifact)),
        )
        if profiles[pid].timeout <= 0:
            bad.append(f"profiles.{pid}.timeout")

    edges = [tuple(e) for e in data.get("translation_edges", DEFAULT_TRANSLATION_EDGES)]
    for a, b in edges:
        if a not in SOURCE_TYPES or b not in SOURCE_TYPES:
            bad.append(f"translation_edges.{a}-{b}")

    dec = data.get("decompose") or {}
    decompose = DecomposeConfig(
        base_class_names=dec.get("base_class_names", ["Scene", "ThreeDScene"]),
        entry_method_name=dec.get("entry_method_name", "construct"),
        import_denylist=dec.get("import_denylist", ["manim_imports_ext*"]),
        play_invocation_names=dec.get("play_invocation_names", ["play"]),
        language_tags=dec.get("language_tags", ["python-manim"]),
        template_id=dec.get("template_id", "unit_default"),
    )
    if not decompose.base_class_names:
        bad.append("decompose.base_class_names")
    if not decompose.entry_method_name:
        bad.append("decompose.entry_method_name")

    k_range = tuple(data.get("reverse_k_range", (10, 40)))
    if len(k_range) != 2 or k_range[0] < 1 or k_range[1] < k_range[0]:
        bad.append("reverse_k_range")

    if bad:
        raise ConfigError("invalid config keys: " + ", ".join(bad), keys=bad)

    return PipelineConfig(
        corpus_dir=corpus_dir,
        templates_dir=data.get("templates_dir"),
        threshold=Fraction(str(data.get("threshold", "4.0"))),
        max_retries=int(data.get("max_retries", 3)),
        max_parallel=int(data.get("max_parallel", 1)),
        seed=int(data.get("seed", 0)),
        reverse_k_range=k_range,  # type: ignore[arg-type]
        reverse_use_ref_context=bool(data.get("reverse_use_ref_context", True)),
        sources=sources,
        matrix=matrix,
        translation_edges=edges,  # type: ignore[arg-type]
        concepts={k: list(v) for k, v in (data.get("concepts") or {}).items()},
        profiles=profiles,
        decompose=decompose,
        annotators=list(data.get("annotators", [])),
        gateway_retries=int(data.get("gateway_retries", 2)),
        raw=data,
    )


def load_config(path: Path | str) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}", keys=[str(path)])
    data = yaml.safe_load(path.read_text(encoding="utf-8"))
    return parse_config(data)
