"""Canonical serialization and output metadata helpers.

Every artifact the toolkit writes is byte-reproducible: canonical JSON is
UTF-8, ASCII-escaped, sorted keys, compact separators, trailing newline.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

TOOL_VERSION = "0.1.0"


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True) + "\n"


def write_canonical_json(path: str | Path, obj) -> None:
    Path(path).write_text(canonical_dumps(obj), encoding="utf-8")


def file_digest(path: str | Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def digest_map(paths: dict[str, str | Path]) -> dict[str, str]:
    """Named input digests for output metadata, e.g. {"project": "sha256:..."}."""
    return {name: file_digest(p) for name, p in sorted(paths.items())}


def digest_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def digest_tree(root: str | Path, rel_paths: list[str]) -> str:
    """Single digest over a set of files (path + content), order-independent."""
    h = hashlib.sha256()
    for rel in sorted(rel_paths):
        h.update(rel.encode("utf-8"))
        h.update(b"\0")
        h.update((Path(root) / rel).read_bytes())
        h.update(b"\0")
    return "sha256:" + h.hexdigest()


def output_meta(seed: int | None, input_digests: dict[str, str], **extra) -> dict:
    meta = {"tool_version": TOOL_VERSION, "seed": seed, "input_digests": input_digests}
    meta.update(extra)
    return meta
