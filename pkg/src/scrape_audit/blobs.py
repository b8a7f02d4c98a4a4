"""Content-addressed storage for HTML payloads.

Visit logs and fetch results stay small by referencing HTML blobs through
relative paths; the bytes live in hash-named files under a common root.
"""

from __future__ import annotations

import hashlib
from pathlib import Path


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class BlobStore:
    """File-backed blob store rooted at a directory.

    References are paths relative to the root, so a visit log and its blobs
    can move together as one directory tree.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def put(self, data: bytes, subdir: str = "blobs") -> str:
        ref = f"{subdir}/{_digest(data)}.html"
        path = self.root / ref
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
        return ref

    def get(self, ref: str) -> bytes:
        return (self.root / ref).read_bytes()

    def exists(self, ref: str) -> bool:
        return (self.root / ref).is_file()

    def text(self, ref: str) -> str:
        return self.get(ref).decode("utf-8", errors="replace")


class MemoryBlobStore:
    """In-memory stand-in with the same interface, for stream ingestion."""

    def __init__(self):
        self._data: dict[str, bytes] = {}

    def put(self, data: bytes, subdir: str = "blobs") -> str:
        ref = f"{subdir}/{_digest(data)}.html"
        self._data[ref] = data
        return ref

    def get(self, ref: str) -> bytes:
        return self._data[ref]

    def exists(self, ref: str) -> bool:
        return ref in self._data

    def text(self, ref: str) -> str:
        return self.get(ref).decode("utf-8", errors="replace")
