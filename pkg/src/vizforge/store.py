"""Content-addressed corpus store: JSONL shards, artifact tree, run manifests.

Layout under the store root:

    shards/shard-00000.jsonl   one SampleRecord per line, append-only
    artifacts/ab/abcd...       raw bytes keyed by sha256, with .meta.json sidecar
    rejects/rejects.jsonl      quarantined malformed source items
    runs/<run_id>.json         manifest (checkpoints + counters) per run
    runs/<run_id>.lock         liveness lock (pid inside)

Records are never mutated in place: a status change appends a superseding
revision with the same record_id. Readers resolve the latest revision.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

from .errors import CorruptionError, LockError, NotFoundError
from .hashing import canonical_json, hash_bytes, hash_text
from .records import SampleRecord

logger = logging.getLogger(__name__)

DEFAULT_SHARD_LIMIT = 64 * 1024 * 1024  # bytes


@dataclass
class RunManifest:
    run_id: str
    config_hash: str
    stage_checkpoints: dict = field(default_factory=dict)  # stage -> {"done", "last_id", "complete"}
    counters: dict = field(default_factory=dict)  # stage -> {"accepted", "rejected", "retried"}

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "config_hash": self.config_hash,
            "stage_checkpoints": self.stage_checkpoints,
            "counters": self.counters,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(
            run_id=d["run_id"],
            config_hash=d["config_hash"],
            stage_checkpoints=d.get("stage_checkpoints", {}),
            counters=d.get("counters", {}),
        )

    def is_complete(self, stages: list[str]) -> bool:
        return all(self.stage_checkpoints.get(s, {}).get("complete") for s in stages)


class CorpusStore:
    def __init__(self, root: Path | str, shard_limit: int = DEFAULT_SHARD_LIMIT):
        self.root = Path(root)
        self.shard_limit = shard_limit
        self._lock = threading.Lock()  # serializes all shard writes (the committer)
        for sub in ("shards", "artifacts", "rejects", "runs"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        # record_id -> (revision, line) for the latest committed revision
        self._latest: dict[str, tuple[int, str]] = {}
        self._load_index()

    # ------------------------------------------------------------------ shards

    def _shard_paths(self) -> list[Path]:
        return sorted((self.root / "shards").glob("shard-*.jsonl"))

    def _load_index(self) -> None:
        for path in self._shard_paths():
            with path.open("r", encoding="utf-8") as fh:
                for raw in fh:
                    raw = raw.rstrip("\n")
                    if not raw:
                        continue
                    try:
                        d = json.loads(raw)
                    except json.JSONDecodeError:
                        # torn trailing write from a killed run; superseded on resume
                        logger.warning("skipping torn line in %s", path.name)
                        continue
                    rid, rev = d["record_id"], int(d.get("revision", 0))
                    cur = self._latest.get(rid)
                    if cur is None or rev >= cur[0]:
                        self._latest[rid] = (rev, raw)

    def _open_shard_for_append(self) -> Path:
        shards = self._shard_paths()
        if shards and shards[-1].stat().st_size < self.shard_limit:
            return shards[-1]
        idx = len(shards)
        path = self.root / "shards" / f"shard-{idx:05d}.jsonl"
        path.touch()
        return path

    def _append_line(self, line: str) -> None:
        path = self._open_shard_for_append()
        with path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    # ----------------------------------------------------------------- records

    def has(self, record_id: str) -> bool:
        return record_id in self._latest

    def store_record(self, record: SampleRecord) -> str:
        """Append a record; identical content is stored once (same id back)."""
        record.validate()
        rid = record.record_id
        line = record.to_line()
        with self._lock:
            cur = self._latest.get(rid)
            if cur is not None:
                if cur[1] == line:
                    return rid
                # same identity, different payload at same/lower revision: dedup
                if record.revision <= cur[0]:
                    return rid
            self._append_line(line)
            self._latest[rid] = (record.revision, line)
        return rid

    def supersede(self, record: SampleRecord) -> str:
        """Commit a new revision of an existing record (status transition).

        Idempotent: if the latest revision already carries the same payload
        (modulo revision number), nothing is written.
        """
        rid = record.record_id
        with self._lock:
            cur = self._latest.get(rid)
            if cur is None:
                record.revision = 0
            else:
                cur_d = json.loads(cur[1])
                new_d = record.to_dict()
                cur_d.pop("revision")
                new_d.pop("revision")
                if canonical_json(cur_d) == canonical_json(new_d):
                    return rid
                record.revision = cur[0] + 1
            record.validate()
            line = record.to_line()
            self._append_line(line)
            self._latest[rid] = (record.revision, line)
        return rid

    def get(self, record_id: str) -> SampleRecord:
        cur = self._latest.get(record_id)
        if cur is None:
            raise NotFoundError(f"record {record_id} not found")
        return SampleRecord.from_dict(json.loads(cur[1]))

    def iter_latest(self) -> Iterator[SampleRecord]:
        for rid in sorted(self._latest):
            yield SampleRecord.from_dict(json.loads(self._latest[rid][1]))

    def latest_lines(self) -> list[str]:
        return [self._latest[rid][1] for rid in sorted(self._latest)]

    def corpus_content_hash(self) -> str:
        return hash_text("\n".join(self.latest_lines()))

    # ----------------------------------------------------------------- rejects

    def quarantine(self, raw_item: dict, reason: str) -> None:
        line = canonical_json({"item": raw_item, "reason": reason})
        with self._lock:
            path = self.root / "rejects" / "rejects.jsonl"
            with path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    # --------------------------------------------------------------- artifacts

    def _artifact_path(self, digest: str) -> Path:
        return self.root / "artifacts" / digest[:2] / digest

    def put_artifact(self, data: bytes, media_kind: str, created_by: str = "") -> str:
        digest = hash_bytes(data)
        path = self._artifact_path(digest)
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp-" + uuid.uuid4().hex[:8])
            tmp.write_bytes(data)
            os.replace(tmp, path)  # concurrent puts race-free: same content
            meta = {
                "hash": digest,
                "media_kind": media_kind,
                "byte_length": len(data),
                "created_by": created_by,
            }
            path.with_name(digest + ".meta.json").write_text(
                canonical_json(meta), encoding="utf-8"
            )
        return digest

    def resolve_artifact(self, digest: str) -> tuple[bytes, str]:
        path = self._artifact_path(digest)
        if not path.exists():
            raise NotFoundError(f"artifact {digest} not found")
        data = path.read_bytes()
        if hash_bytes(data) != digest:
            raise CorruptionError(f"artifact {digest} failed hash verification")
        meta_path = path.with_name(digest + ".meta.json")
        media_kind = "log"
        if meta_path.exists():
            media_kind = json.loads(meta_path.read_text(encoding="utf-8"))["media_kind"]
        return data, media_kind

    # -------------------------------------------------------------------- runs

    def open_run(self, config_hash: str, stages: list[str]) -> "RunHandle":
        runs_dir = self.root / "runs"
        for path in sorted(runs_dir.glob("*.json")):
            manifest = RunManifest.from_dict(json.loads(path.read_text(encoding="utf-8")))
            if manifest.config_hash == config_hash and not manifest.is_complete(stages):
                return RunHandle(self, manifest, resumed=True)
        run_id = config_hash[:12] + "-" + uuid.uuid4().hex[:8]
        manifest = RunManifest(run_id=run_id, config_hash=config_hash)
        handle = RunHandle(self, manifest, resumed=False)
        handle.save()
        return handle


class RunHandle:
    def __init__(self, store: CorpusStore, manifest: RunManifest, resumed: bool):
        self.store = store
        self.manifest = manifest
        self.resumed = resumed
        self._lock_path = store.root / "runs" / f"{manifest.run_id}.lock"
        self._acquire_lock()

    def _acquire_lock(self) -> None:
        try:
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            pid_text = self._lock_path.read_text().strip() or "0"
            if _pid_alive(int(pid_text)):
                raise LockError(
                    f"run {self.manifest.run_id} is already open (pid {pid_text})"
                )
            # stale lock from a killed run
            self._lock_path.unlink()
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)

    @property
    def run_id(self) -> str:
        return self.manifest.run_id

    def save(self) -> None:
        path = self.store.root / "runs" / f"{self.manifest.run_id}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(canonical_json(self.manifest.to_dict()), encoding="utf-8")
        os.replace(tmp, path)

    def checkpoint(self, stage: str) -> dict:
        return self.manifest.stage_checkpoints.setdefault(
            stage, {"done": 0, "last_id": None, "complete": False}
        )

    def advance(self, stage: str, last_id: Optional[str] = None) -> None:
        cp = self.checkpoint(stage)
        cp["done"] += 1
        cp["last_id"] = last_id
        self.save()

    def complete_stage(self, stage: str) -> None:
        self.checkpoint(stage)["complete"] = True
        self.save()

    def count(self, stage: str, key: str, n: int = 1) -> None:
        c = self.manifest.counters.setdefault(
            stage, {"accepted": 0, "rejected": 0, "retried": 0}
        )
        c[key] = c.get(key, 0) + n

    def close(self) -> None:
        self.save()
        if self._lock_path.exists():
            self._lock_path.unlink()


def _pid_alive(pid: int) -> bool:
    if pid <= 0:
        return False
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True
