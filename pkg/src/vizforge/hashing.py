"""Canonical serialization and content hashing.

Identity of every record and artifact is a SHA-256 over a canonical byte
string: JSON with sorted keys, compact separators, UTF-8, no ASCII escaping.
Identity fields never contain floats, so the encoding is bit-stable.
"""

import hashlib
import json


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def content_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def hash_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def hash_text(text: str) -> str:
    return hash_bytes(text.encode("utf-8"))
