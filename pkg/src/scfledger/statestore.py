"""World state: a namespaced key-value map plus tracked execution views.

The committed state is only ever mutated by the single-writer commit
stage. Contract handlers run against a :class:`StateView` that buffers
writes and records read/write sets; the buffered writes apply atomically
on success, so a failed transaction leaves no partial writes.
"""

from __future__ import annotations

import threading
from typing import Dict, Iterator, List, Optional, Tuple

from .canonical import ZERO_DIGEST, digest_value

_TOMBSTONE = object()


class WorldState:
    def __init__(self) -> None:
        self._data: Dict[str, object] = {}
        self.last_committed_height = -1
        self._lock = threading.Lock()

    def get(self, key: str) -> Optional[object]:
        with self._lock:
            return self._data.get(key)

    def exists(self, key: str) -> bool:
        with self._lock:
            return key in self._data

    def apply(self, writes: Dict[str, object]) -> None:
        """Apply a buffered write set; deletions are tombstone sentinels."""
        with self._lock:
            for key, value in writes.items():
                if value is _TOMBSTONE:
                    self._data.pop(key, None)
                else:
                    self._data[key] = value

    def snapshot(self) -> Dict[str, object]:
        with self._lock:
            return dict(self._data)

    def scan_prefix(self, prefix: str) -> List[Tuple[str, object]]:
        with self._lock:
            return [(k, v) for k, v in self._data.items() if k.startswith(prefix)]

    def keys(self) -> List[str]:
        with self._lock:
            return list(self._data)

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)


class StateView:
    """Read/write-tracking view over the committed state.

    Values are treated as immutable once stored: handlers must write new
    objects rather than mutate in place. Read and write sets preserve
    first-access order, which is deterministic for deterministic handlers.
    """

    def __init__(self, base: WorldState):
        self._base = base
        self._writes: Dict[str, object] = {}
        self._reads: Dict[str, str] = {}

    def get(self, key: str) -> Optional[object]:
        if key in self._writes:
            value = self._writes[key]
            return None if value is _TOMBSTONE else value
        value = self._base.get(key)
        if key not in self._reads:
            self._reads[key] = ZERO_DIGEST if value is None else digest_value(value)
        return value

    def exists(self, key: str) -> bool:
        return self.get(key) is not None

    def put(self, key: str, value: object) -> None:
        self._writes[key] = value

    def delete(self, key: str) -> None:
        self._writes[key] = _TOMBSTONE

    def scan_prefix(self, prefix: str) -> List[Tuple[str, object]]:
        """Committed entries first (insertion order), then new writes."""
        merged: List[Tuple[str, object]] = []
        for key, value in self._base.scan_prefix(prefix):
            if key in self._writes:
                override = self._writes[key]
                if override is not _TOMBSTONE:
                    merged.append((key, override))
            else:
                merged.append((key, value))
        for key, value in self._writes.items():
            if key.startswith(prefix) and value is not _TOMBSTONE:
                if not self._base.exists(key):
                    merged.append((key, value))
        return merged

    def read_set(self) -> List[List[str]]:
        return [[key, digest] for key, digest in self._reads.items()]

    def write_set(self) -> List[List[str]]:
        out: List[List[str]] = []
        for key, value in self._writes.items():
            digest = ZERO_DIGEST if value is _TOMBSTONE else digest_value(value)
            out.append([key, digest])
        return out

    def apply(self) -> None:
        self._base.apply(self._writes)

    @property
    def writes(self) -> Dict[str, object]:
        return self._writes
