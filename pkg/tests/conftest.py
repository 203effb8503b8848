import json
from pathlib import Path

import pytest

from vizforge.config import parse_config
from vizforge.gateway import StubGateway
from vizforge.records import SampleRecord
from vizforge.store import CorpusStore

FIXTURES = Path(__file__).parent / "fixtures"

ALL_SOURCE_CONCEPTS = {
    "matplotlib": ["bar chart", "scatter plot", "heatmap"],
    "charts": ["line chart", "pie chart"],
    "algorithm": ["dynamic programming", "graph traversal"],
    "mathematica": ["parametric surface", "number theory"],
    "scientific-pl": ["regression", "signal filtering"],
    "webui": ["add a widget", "change the color of a button"],
    "general-artifact": ["landing page", "dashboard"],
}


def make_config(tmp_path, **overrides):
    data = {
        "corpus_dir": str(tmp_path / "corpus"),
        "threshold": "4.0",
        "max_retries": 3,
        "seed": 7,
        "concepts": ALL_SOURCE_CONCEPTS,
        "sources": [],
    }
    data.update(overrides)
    return parse_config(data)


def noop_validation_matrix():
    """Matrix rows with every validation backend disabled (no-op sandbox)."""
    from vizforge.config import DEFAULT_MATRIX

    return {
        st: {"validation": "none", "reward": judge, "strategies": strategies}
        for st, (_, judge, strategies) in DEFAULT_MATRIX.items()
    }


def make_record(source_type="matplotlib", fmt="Paired", code="print(1)", instruction="plot it", **kw):
    return SampleRecord(
        source_type=source_type,
        format=fmt,
        code=code,
        instruction=instruction if fmt == "Paired" else None,
        **kw,
    )


def write_source_jsonl(path: Path, items: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item) + "\n")
    return path


@pytest.fixture
def store(tmp_path):
    return CorpusStore(tmp_path / "corpus")


@pytest.fixture
def config(tmp_path):
    return make_config(tmp_path)


@pytest.fixture
def gateway(tmp_path):
    return StubGateway()
