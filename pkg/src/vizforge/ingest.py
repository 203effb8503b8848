"""Source ingestion: classify raw items into Paired/CodeOnly and commit them.

Sources are local JSONL dumps (one raw item per line). A field map per
source names which raw fields carry the instruction, the code, and an
optional visual. Classification is total: any well-formed item lands in
exactly one of the two formats.
"""

from __future__ import annotations

import glob
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .config import SourceConfig
from .errors import MalformedItemError, SourceError
from .records import SampleRecord
from .store import CorpusStore

logger = logging.getLogger(__name__)


@dataclass
class IngestStats:
    seen: int = 0
    stored: int = 0
    deduped: int = 0
    malformed: int = 0

    def as_dict(self) -> dict:
        return {
            "seen": self.seen,
            "stored": self.stored,
            "deduped": self.deduped,
            "malformed": self.malformed,
        }


def classify_source(raw_item: dict, field_map: dict) -> str:
    """Return "Paired" or "CodeOnly" for one mapped raw item."""
    code = raw_item.get(field_map.get("code", "code"))
    if not code:
        raise MalformedItemError("item has empty or missing code field")
    instruction = raw_item.get(field_map.get("instruction", "instruction"))
    return "Paired" if instruction else "CodeOnly"


def item_to_record(
    raw_item: dict, source: SourceConfig, store: CorpusStore | None = None
) -> SampleRecord:
    fmt = classify_source(raw_item, source.field_map)
    code = raw_item[source.field_map.get("code", "code")]
    instruction = raw_item.get(source.field_map.get("instruction", "instruction"))
    visual_refs: list[str] = []
    visual_field = source.field_map.get("visual")
    if visual_field and raw_item.get(visual_field) and store is not None:
        visual = raw_item[visual_field]
        data = visual.encode("utf-8") if isinstance(visual, str) else bytes(visual)
        visual_refs.append(store.put_artifact(data, "image", created_by="ingest"))
    return SampleRecord(
        source_type=source.source_type,
        format=fmt,
        code=code,
        instruction=instruction if fmt == "Paired" else None,
        visual_refs=visual_refs,
        language_tag=raw_item.get("language_tag", ""),
    )


def iter_source_items(source: SourceConfig):
    paths = sorted(glob.glob(source.locator))
    if not paths and not glob.has_magic(source.locator):
        raise SourceError(f"locator matches nothing: {source.locator}")
    for path in paths:
        with Path(path).open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)


def ingest_batch(source: SourceConfig, store: CorpusStore) -> IngestStats:
    """Classify and commit every well-formed item; per-item failures never abort."""
    stats = IngestStats()
    for raw_item in iter_source_items(source):
        stats.seen += 1
        try:
            record = item_to_record(raw_item, source, store)
        except (MalformedItemError, KeyError) as exc:
            stats.malformed += 1
            store.quarantine(raw_item, str(exc))
            continue
        if store.has(record.record_id):
            stats.deduped += 1
            continue
        store.store_record(record)
        stats.stored += 1
    logger.info("ingest %s: %s", source.source_type, stats.as_dict())
    return stats
