import pytest

from conftest import write_source_jsonl

from vizforge.config import SourceConfig
from vizforge.errors import MalformedItemError, SourceError
from vizforge.ingest import classify_source, ingest_batch

FIELD_MAP = {"instruction": "instruction", "code": "code", "visual": "visual"}


def source_for(path):
    return SourceConfig(source_type="matplotlib", locator=str(path), field_map=FIELD_MAP)


class TestClassify:
    def test_instruction_and_code_is_paired(self):
        assert classify_source({"instruction": "plot a bar chart", "code": "..."}, FIELD_MAP) == "Paired"

    def test_code_only(self):
        assert classify_source({"code": "..."}, FIELD_MAP) == "CodeOnly"

    def test_visual_is_optional_for_paired(self):
        item = {"instruction": "x", "code": "y", "visual": "img"}
        assert classify_source(item, FIELD_MAP) == "Paired"

    def test_missing_code_is_malformed(self):
        with pytest.raises(MalformedItemError):
            classify_source({"instruction": "...", "image": "..."}, FIELD_MAP)

    def test_empty_instruction_is_code_only(self):
        assert classify_source({"instruction": "", "code": "y"}, FIELD_MAP) == "CodeOnly"


class TestIngestBatch:
    def test_duplicates_counted_not_restored(self, tmp_path, store):
        items = [{"instruction": f"task {i}", "code": f"x = {i}"} for i in range(90)]
        items += items[:10]  # 10 exact duplicates
        path = write_source_jsonl(tmp_path / "src.jsonl", items)
        stats = ingest_batch(source_for(path), store)
        assert stats.seen == 100
        assert stats.stored == 90
        assert stats.deduped == 10
        assert stats.malformed == 0

    def test_empty_source_all_zero(self, tmp_path, store):
        path = write_source_jsonl(tmp_path / "empty.jsonl", [])
        stats = ingest_batch(source_for(path), store)
        assert stats.as_dict() == {"seen": 0, "stored": 0, "deduped": 0, "malformed": 0}

    def test_malformed_item_quarantined(self, tmp_path, store):
        items = [
            {"instruction": "a", "code": "x=1"},
            {"instruction": "b"},  # no code
            {"code": "x=2"},
        ]
        path = write_source_jsonl(tmp_path / "src.jsonl", items)
        stats = ingest_batch(source_for(path), store)
        assert (stats.stored, stats.malformed) == (2, 1)
        rejects = (store.root / "rejects" / "rejects.jsonl").read_text()
        assert "code" in rejects

    def test_stats_sum_to_seen(self, tmp_path, store):
        items = [{"code": f"y={i}"} for i in range(5)] + [{"nope": 1}]
        path = write_source_jsonl(tmp_path / "src.jsonl", items)
        stats = ingest_batch(source_for(path), store)
        assert stats.stored + stats.deduped + stats.malformed == stats.seen

    def test_idempotent_reingest(self, tmp_path, store):
        items = [{"instruction": "a", "code": "x=1"}, {"code": "x=2"}]
        path = write_source_jsonl(tmp_path / "src.jsonl", items)
        ingest_batch(source_for(path), store)
        before = store.corpus_content_hash()
        stats = ingest_batch(source_for(path), store)
        assert stats.deduped == 2
        assert store.corpus_content_hash() == before

    def test_unreachable_locator(self, store):
        with pytest.raises(SourceError):
            ingest_batch(source_for("/nonexistent/file.jsonl"), store)
