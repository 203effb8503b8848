"""Syntax-tree decomposition of long scripts into scene-level semantic units.

Static analysis only: the source is parsed, never executed. A unit is one
class that (a) directly names a configured base class among its bases and
(b) defines the configured entry method. Features are pulled from the entry
method body: constructor calls, animation calls passed to play-style
invocations, string literals, and denylist-filtered imports.
"""

from __future__ import annotations

import ast
import fnmatch
import logging
from dataclasses import dataclass, field

from .config import DecomposeConfig
from .errors import ParseError
from .hashing import canonical_json

logger = logging.getLogger(__name__)

UNIT_SCHEMA_VERSION = 1


@dataclass
class FeatureSet:
    instantiated_objects: list[str] = field(default_factory=list)
    invoked_animations: list[str] = field(default_factory=list)
    text_literals: list[str] = field(default_factory=list)
    imports: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "instantiated_objects": self.instantiated_objects,
            "invoked_animations": self.invoked_animations,
            "text_literals": self.text_literals,
            "imports": self.imports,
        }


@dataclass
class SemanticUnit:
    origin_record_id: str
    class_name: str
    source_span: tuple[int, int]  # 1-based inclusive line range
    features: FeatureSet
    excerpt: str
    template_id: str = "unit_default"

    def to_dict(self) -> dict:
        return {
            "schema_version": UNIT_SCHEMA_VERSION,
            "origin_record_id": self.origin_record_id,
            "class_name": self.class_name,
            "source_span": list(self.source_span),
            "features": self.features.to_dict(),
            "excerpt": self.excerpt,
            "template_id": self.template_id,
        }

    def to_line(self) -> str:
        return canonical_json(self.to_dict())


def _base_names(node: ast.ClassDef) -> list[str]:
    names = []
    for base in node.bases:
        if isinstance(base, ast.Name):
            names.append(base.id)
        elif isinstance(base, ast.Attribute):
            names.append(base.attr)
    return names


def _call_name(func: ast.expr) -> str | None:
    if isinstance(func, ast.Name):
        return func.id
    if isinstance(func, ast.Attribute):
        return func.attr
    return None


def _denied(module: str, denylist: list[str]) -> bool:
    return any(fnmatch.fnmatch(module, pat) for pat in denylist)


def extract_features(unit_body: list[ast.stmt], profile: DecomposeConfig) -> FeatureSet:
    """Walk an entry-method body and collect its semantic features."""
    fs = FeatureSet()
    animation_nodes: set[int] = set()

    for node in ast.walk(ast.Module(body=list(unit_body), type_ignores=[])):
        if isinstance(node, ast.Call):
            name = _call_name(node.func)
            if name in profile.play_invocation_names and isinstance(node.func, ast.Attribute):
                for arg in node.args:
                    if isinstance(arg, ast.Call):
                        anim = _call_name(arg.func)
                        if anim:
                            animation_nodes.add(id(arg))
                            if anim not in fs.invoked_animations:
                                fs.invoked_animations.append(anim)

    for node in ast.walk(ast.Module(body=list(unit_body), type_ignores=[])):
        if isinstance(node, ast.Call) and id(node) not in animation_nodes:
            name = _call_name(node.func)
            if name and name[:1].isupper() and name not in fs.instantiated_objects:
                fs.instantiated_objects.append(name)
        elif isinstance(node, ast.Constant) and isinstance(node.value, str):
            if node.value not in fs.text_literals:
                fs.text_literals.append(node.value)
        elif isinstance(node, ast.Import):
            for alias in node.names:
                if not _denied(alias.name, profile.import_denylist):
                    if alias.name not in fs.imports:
                        fs.imports.append(alias.name)
        elif isinstance(node, ast.ImportFrom):
            module = node.module or ""
            if module and not _denied(module, profile.import_denylist):
                if module not in fs.imports:
                    fs.imports.append(module)
    return fs


def _file_imports(tree: ast.Module, profile: DecomposeConfig) -> list[str]:
    imports = []
    for node in tree.body:
        if isinstance(node, ast.Import):
            names = [a.name for a in node.names]
        elif isinstance(node, ast.ImportFrom):
            names = [node.module] if node.module else []
        else:
            continue
        for name in names:
            if not _denied(name, profile.import_denylist) and name not in imports:
                imports.append(name)
    return imports


def parse_units(
    source_text: str, profile: DecomposeConfig, origin_record_id: str = ""
) -> list[SemanticUnit]:
    """Extract one unit per qualifying scene class, ordered by start line."""
    try:
        tree = ast.parse(source_text)
    except SyntaxError as exc:
        raise ParseError(
            f"syntax error: {exc.msg}", line=exc.lineno or 0, col=exc.offset or 0
        ) from exc

    lines = source_text.splitlines()
    file_imports = _file_imports(tree, profile)
    units: list[SemanticUnit] = []

    for node in tree.body:
        if not isinstance(node, ast.ClassDef):
            continue
        if not any(b in profile.base_class_names for b in _base_names(node)):
            continue
        entry = next(
            (
                n
                for n in node.body
                if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef))
                and n.name == profile.entry_method_name
            ),
            None,
        )
        if entry is None:
            logger.warning(
                "class %s inherits a scene base but has no %s(); skipped",
                node.name,
                profile.entry_method_name,
            )
            continue
        features = extract_features(entry.body, profile)
        for imp in file_imports:
            if imp not in features.imports:
                features.imports.append(imp)
        span = (node.lineno, node.end_lineno or node.lineno)
        excerpt = "\n".join(lines[span[0] - 1 : span[1]])
        units.append(
            SemanticUnit(
                origin_record_id=origin_record_id,
                class_name=node.name,
                source_span=span,
                features=features,
                excerpt=excerpt,
                template_id=profile.template_id,
            )
        )

    units.sort(key=lambda u: u.source_span[0])
    return units
