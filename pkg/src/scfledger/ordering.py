"""Ordering service: batches submitted transactions into block candidates.

Two modes. Solo keeps one FIFO queue. The Kafka-style mode spreads
transactions over P partitions by tx id and drains them with a
deterministic round-robin merge ordered by (partition offset, partition
index), so the resulting block stream is a function only of the submitted
transactions and their per-partition arrival order. With one partition it
degenerates to the solo FIFO exactly.

A block is cut when the configured size is reached, or when at least one
transaction has waited longer than the timeout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from .chainlog import Transaction
from .errors import ConfigError


@dataclass
class _Queued:
    tx: Transaction
    enqueued_ms: int
    offset: int
    partition: int


class BaseOrderer:
    def __init__(self) -> None:
        self._items: List[_Queued] = []

    def pending_count(self) -> int:
        return len(self._items)

    def _oldest_ms(self) -> Optional[int]:
        if not self._items:
            return None
        return min(item.enqueued_ms for item in self._items)

    def _ordered(self) -> List[_Queued]:
        raise NotImplementedError

    def _remove(self, taken: List[_Queued]) -> None:
        taken_ids = {id(item) for item in taken}
        self._items = [item for item in self._items if id(item) not in taken_ids]

    def try_cut(
        self, now_ms: int, block_size: int, timeout_ms: int
    ) -> Optional[List[Transaction]]:
        """Return the next block's transactions, or None if no cut is due."""
        if not self._items:
            return None
        ordered = self._ordered()
        if len(ordered) >= block_size:
            taken = ordered[:block_size]
        elif now_ms - self._oldest_ms() >= timeout_ms:
            taken = ordered
        else:
            return None
        self._remove(taken)
        return [item.tx for item in taken]

    def drain(self, block_size: int) -> Optional[List[Transaction]]:
        """Cut immediately, ignoring the timeout; used by flush paths."""
        if not self._items:
            return None
        taken = self._ordered()[:block_size]
        self._remove(taken)
        return [item.tx for item in taken]


class SoloOrderer(BaseOrderer):
    """Single FIFO queue."""

    def __init__(self) -> None:
        super().__init__()
        self._seq = 0

    def append(self, tx: Transaction, now_ms: int) -> None:
        self._items.append(_Queued(tx, now_ms, self._seq, 0))
        self._seq += 1

    def _ordered(self) -> List[_Queued]:
        return sorted(self._items, key=lambda q: q.offset)


class KafkaStyleOrderer(BaseOrderer):
    """Deterministic multi-partition merge."""

    def __init__(self, partitions: int):
        if partitions < 1:
            raise ConfigError("kafka ordering needs at least one partition")
        super().__init__()
        self.partitions = partitions
        self._offsets = [0] * partitions

    def assign_partition(self, tx_id: str) -> int:
        return int(tx_id, 16) % self.partitions

    def append(self, tx: Transaction, now_ms: int) -> None:
        partition = self.assign_partition(tx.tx_id)
        self._items.append(_Queued(tx, now_ms, self._offsets[partition], partition))
        self._offsets[partition] += 1

    def _ordered(self) -> List[_Queued]:
        return sorted(self._items, key=lambda q: (q.offset, q.partition))


def make_orderer(mode: str) -> BaseOrderer:
    """Parse an ordering mode string: ``solo`` or ``kafka:P``."""
    if mode == "solo":
        return SoloOrderer()
    if mode.startswith("kafka:"):
        try:
            partitions = int(mode.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad ordering mode: {mode!r}")
        return KafkaStyleOrderer(partitions)
    raise ConfigError(f"bad ordering mode: {mode!r}")
