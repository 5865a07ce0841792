"""Append-only JSONL event log with a running SHA-256 over the raw lines.

Each line is either a routed frame or an interaction event, canonically
serialized. The final digest is written to a `.sha256` side-car so a log can
be verified byte-for-byte after the fact.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any, List, Optional

from .model import canonical_serialize


class EventLog:
    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path else None
        self.lines: List[bytes] = []
        self._hash = hashlib.sha256()
        self._fh = None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "wb")

    def append(self, record: Any) -> int:
        """Append one record; returns its offset (line index)."""
        if hasattr(record, "to_plain"):
            record = record.to_plain()
        line = canonical_serialize(record) + b"\n"
        offset = len(self.lines)
        self.lines.append(line)
        self._hash.update(line)
        if self._fh:
            self._fh.write(line)
        return offset

    def digest(self) -> str:
        return self._hash.hexdigest()

    def close(self):
        if self._fh:
            self._fh.flush()
            self._fh.close()
            self._fh = None
            sidecar = self.path.with_suffix(self.path.suffix + ".sha256")
            sidecar.write_text(self.digest() + "\n")


def read_log(path: Path) -> List[bytes]:
    raw = Path(path).read_bytes()
    if not raw:
        return []
    return [line + b"\n" for line in raw.rstrip(b"\n").split(b"\n")]


def compute_digest(lines: List[bytes]) -> str:
    h = hashlib.sha256()
    for line in lines:
        h.update(line)
    return h.hexdigest()


def sidecar_digest(path: Path) -> Optional[str]:
    sidecar = Path(path).with_suffix(Path(path).suffix + ".sha256")
    if not sidecar.exists():
        return None
    return sidecar.read_text().strip()
