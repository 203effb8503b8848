"""Human review store and API: faithfulness scores and reward spot-checks.

Events are appended to items.jsonl and replayed on open. First submission
wins; later conflicting submissions are logged and the stored score is
returned. Server-side validation is authoritative: an out-of-range or
non-integer score can never reach the store.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response

from .hashing import canonical_json

logger = logging.getLogger(__name__)

KINDS = ("bench_faith", "reward_spotcheck")


@dataclass
class ReviewItem:
    item_id: str
    kind: str
    media: list[str] = field(default_factory=list)
    instruction: str = ""
    status: str = "pending"  # pending | scored
    score: Optional[int] = None
    comment: Optional[str] = None
    annotator_id: Optional[str] = None
    task_id: Optional[str] = None  # bench task this item feeds
    record_id: Optional[str] = None  # corpus record for spot-checks

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "kind": self.kind,
            "media": self.media,
            "instruction": self.instruction,
            "status": self.status,
            "score": self.score,
            "comment": self.comment,
            "annotator_id": self.annotator_id,
            "task_id": self.task_id,
            "record_id": self.record_id,
        }


class ReviewStore:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.path = self.root / "items.jsonl"
        self._lock = threading.Lock()
        self._items: dict[str, ReviewItem] = {}
        self._order: list[str] = []
        self._replay()

    def _replay(self) -> None:
        if not self.path.exists():
            return
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                event = json.loads(line)
                if event["event"] == "add":
                    item = ReviewItem(**event["item"])
                    self._items[item.item_id] = item
                    self._order.append(item.item_id)
                elif event["event"] == "score":
                    item = self._items.get(event["item_id"])
                    if item and item.status == "pending":
                        item.status = "scored"
                        item.score = event["score"]
                        item.comment = event.get("comment")
                        item.annotator_id = event["annotator_id"]

    def _append(self, event: dict) -> None:
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(canonical_json(event) + "\n")

    def add_item(self, item: ReviewItem) -> None:
        with self._lock:
            if item.item_id in self._items:
                return
            self._append({"event": "add", "item": item.to_dict()})
            self._items[item.item_id] = item
            self._order.append(item.item_id)

    def get(self, item_id: str) -> Optional[ReviewItem]:
        return self._items.get(item_id)

    def fetch_queue(self, annotator_id: str, kind: Optional[str] = None) -> list[ReviewItem]:
        """Pending items not yet scored by this annotator, oldest first."""
        out = []
        for iid in self._order:
            item = self._items[iid]
            if item.status != "pending":
                continue
            if kind and item.kind != kind:
                continue
            out.append(item)
        return out

    def submit_score(
        self, item_id: str, annotator_id: str, score: int, comment: Optional[str] = None
    ) -> tuple[str, ReviewItem]:
        """Returns ("ok"|"conflict"|"duplicate", item). Raises on bad input."""
        if not isinstance(score, int) or isinstance(score, bool) or not 1 <= score <= 5:
            raise ValueError(f"score must be an integer in [1,5], got {score!r}")
        with self._lock:
            item = self._items.get(item_id)
            if item is None:
                raise KeyError(item_id)
            if item.status == "scored":
                if item.annotator_id == annotator_id:
                    # idempotent per (item, annotator): first submission wins
                    if item.score != score:
                        logger.warning(
                            "conflicting resubmission for %s by %s (%s vs stored %s)",
                            item_id,
                            annotator_id,
                            score,
                            item.score,
                        )
                        return "conflict", item
                    return "duplicate", item
                return "conflict", item
            self._append(
                {
                    "event": "score",
                    "item_id": item_id,
                    "annotator_id": annotator_id,
                    "score": score,
                    "comment": comment,
                }
            )
            item.status = "scored"
            item.score = score
            item.comment = comment
            item.annotator_id = annotator_id
            return "ok", item

    def faith_scores(self) -> dict[str, int]:
        """task_id -> faithfulness score, for scored bench_faith items."""
        out = {}
        for item in self._items.values():
            if item.kind == "bench_faith" and item.status == "scored" and item.task_id:
                out[item.task_id] = item.score
        return out


def create_app(store: ReviewStore, annotators: list[str], corpus_store=None):
    """FastAPI app serving the review queue to the browser UI."""
    app = FastAPI(title="vizforge review")

    def _auth(annotator: Optional[str]):
        if not annotator or annotator not in annotators:
            return JSONResponse({"error": "unknown annotator"}, status_code=401)
        return None

    @app.get("/api/queue")
    def queue(annotator: str = Query(default=""), kind: Optional[str] = Query(default=None)):
        err = _auth(annotator)
        if err:
            return err
        items = store.fetch_queue(annotator, kind)
        return {"items": [i.to_dict() for i in items]}

    @app.get("/api/item/{item_id}/media")
    def media(item_id: str):
        item = store.get(item_id)
        if item is None:
            return JSONResponse({"error": "unknown item"}, status_code=404)
        if not item.media or corpus_store is None:
            return JSONResponse({"error": "no media"}, status_code=404)
        data, kind = corpus_store.resolve_artifact(item.media[0])
        media_types = {
            "image": "image/png",
            "video": "video/mp4",
            "html_snapshot": "text/html",
        }
        return Response(content=data, media_type=media_types.get(kind, "application/octet-stream"))

    @app.post("/api/item/{item_id}/score")
    async def submit(item_id: str, request: Request):
        body = await request.json()
        annotator = body.get("annotator")
        err = _auth(annotator)
        if err:
            return err
        score = body.get("score")
        if not isinstance(score, int) or isinstance(score, bool) or not 1 <= score <= 5:
            return JSONResponse(
                {"error": "score must be an integer in [1,5]"}, status_code=400
            )
        try:
            outcome, item = store.submit_score(
                item_id, annotator, score, body.get("comment")
            )
        except KeyError:
            return JSONResponse({"error": "unknown item"}, status_code=404)
        if outcome == "conflict" and item.annotator_id != annotator:
            return JSONResponse(
                {"error": "already scored", "score": item.score}, status_code=409
            )
        return {"status": "ok", "score": item.score, "stored": outcome == "ok"}

    return app
