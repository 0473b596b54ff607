"""Transactions, blocks, the Merkle root, and the append-only block log.

Log file format (bit-exact): the magic bytes ``FSCF``, one format-version
byte, then repeated ``[8-byte big-endian length || canonical-JSON block]``
segments. The log is the source of truth; any state snapshot is a cache.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

from .canonical import ZERO_HASH, canonical_json_bytes, sha256_hex, sha256_raw
from .identity import SignedEnvelope

LOG_MAGIC = b"FSCF"
LOG_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Transaction:
    tx_id: str
    invoked_op: str
    args: dict
    envelope: SignedEnvelope
    read_set: Tuple[Tuple[str, str], ...]
    write_set: Tuple[Tuple[str, str], ...]

    def body_json(self) -> dict:
        """Everything the tx id commits to: the record minus the id itself."""
        return {
            "invokedOp": self.invoked_op,
            "args": self.args,
            "envelope": self.envelope.to_json(),
            "readSet": [list(entry) for entry in self.read_set],
            "writeSet": [list(entry) for entry in self.write_set],
        }

    def to_json(self) -> dict:
        body = self.body_json()
        body["txId"] = self.tx_id
        return body

    @classmethod
    def from_json(cls, data: dict) -> "Transaction":
        return cls(
            tx_id=data["txId"],
            invoked_op=data["invokedOp"],
            args=data["args"],
            envelope=SignedEnvelope.from_json(data["envelope"]),
            read_set=tuple(tuple(e) for e in data["readSet"]),
            write_set=tuple(tuple(e) for e in data["writeSet"]),
        )


def tx_digest(body: dict) -> str:
    return sha256_hex(canonical_json_bytes(body))


def make_transaction(
    invoked_op: str,
    args: dict,
    envelope: SignedEnvelope,
    read_set: List[List[str]],
    write_set: List[List[str]],
) -> Transaction:
    tx = Transaction(
        tx_id="",
        invoked_op=invoked_op,
        args=args,
        envelope=envelope,
        read_set=tuple(tuple(e) for e in read_set),
        write_set=tuple(tuple(e) for e in write_set),
    )
    return Transaction(
        tx_id=tx_digest(tx.body_json()),
        invoked_op=invoked_op,
        args=args,
        envelope=envelope,
        read_set=tx.read_set,
        write_set=tx.write_set,
    )


def merkle_root(tx_ids: List[str]) -> str:
    """Binary Merkle root over tx id digests, duplicate-last padding.

    The empty list (genesis has no preceding level) maps to 32 zero bytes;
    a single leaf is its own root.
    """
    if not tx_ids:
        return ZERO_HASH.hex()
    level = [bytes.fromhex(t) for t in tx_ids]
    while len(level) > 1:
        if len(level) % 2 == 1:
            level.append(level[-1])
        level = [sha256_raw(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0].hex()


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: str  # hex, 32 bytes
    tx_root: str  # hex, 32 bytes
    txs: Tuple[Transaction, ...]
    timestamp: int  # UTC seconds
    invalid: Tuple[Tuple[int, str], ...]  # (tx index, error code), set at commit
    block_hash: str

    def header_json(self) -> dict:
        return {
            "height": self.height,
            "prevHash": self.prev_hash,
            "txRoot": self.tx_root,
            "timestamp": self.timestamp,
            "invalid": [[i, code] for i, code in self.invalid],
        }

    def to_json(self) -> dict:
        data = self.header_json()
        data["txs"] = [tx.to_json() for tx in self.txs]
        data["blockHash"] = self.block_hash
        return data

    @classmethod
    def from_json(cls, data: dict) -> "Block":
        return cls(
            height=data["height"],
            prev_hash=data["prevHash"],
            tx_root=data["txRoot"],
            txs=tuple(Transaction.from_json(t) for t in data["txs"]),
            timestamp=data["timestamp"],
            invalid=tuple((i, code) for i, code in data["invalid"]),
            block_hash=data["blockHash"],
        )

    def valid_txs(self) -> List[Transaction]:
        flagged = {i for i, _ in self.invalid}
        return [tx for i, tx in enumerate(self.txs) if i not in flagged]


def block_header_hash(header: dict) -> str:
    return sha256_hex(canonical_json_bytes(header))


def seal_block(
    height: int,
    prev_hash: str,
    txs: List[Transaction],
    timestamp: int,
    invalid: List[Tuple[int, str]],
) -> Block:
    tx_root = merkle_root([tx.tx_id for tx in txs])
    block = Block(
        height=height,
        prev_hash=prev_hash,
        tx_root=tx_root,
        txs=tuple(txs),
        timestamp=timestamp,
        invalid=tuple(invalid),
        block_hash="",
    )
    return Block(
        height=height,
        prev_hash=prev_hash,
        tx_root=tx_root,
        txs=tuple(txs),
        timestamp=timestamp,
        invalid=tuple(invalid),
        block_hash=block_header_hash(block.header_json()),
    )


class LogFormatError(Exception):
    pass


class BlockLog:
    """Append-only block log, memory-backed with optional file persistence."""

    def __init__(self, path: Optional[Path] = None):
        self._path = Path(path) if path else None
        if self._path and self._path.exists():
            self._buffer = bytearray(self._path.read_bytes())
            header = bytes(self._buffer[: len(LOG_MAGIC) + 1])
            if header[: len(LOG_MAGIC)] != LOG_MAGIC:
                raise LogFormatError("bad log magic")
            if header[len(LOG_MAGIC)] != LOG_FORMAT_VERSION:
                raise LogFormatError("unsupported log format version")
        else:
            self._buffer = bytearray(LOG_MAGIC + bytes([LOG_FORMAT_VERSION]))
            if self._path:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                self._path.write_bytes(bytes(self._buffer))

    def append_block(self, block: Block) -> None:
        data = canonical_json_bytes(block.to_json())
        segment = struct.pack(">Q", len(data)) + data
        self._buffer += segment
        if self._path:
            with self._path.open("ab") as f:
                f.write(segment)

    def raw_bytes(self) -> bytes:
        return bytes(self._buffer)

    def blocks(self) -> Iterator[Block]:
        for block_dict, _raw in iter_block_segments(self.raw_bytes()):
            yield Block.from_json(block_dict)

    def __len__(self) -> int:
        return sum(1 for _ in iter_block_segments(self.raw_bytes()))


def iter_block_segments(data: bytes) -> Iterator[Tuple[dict, bytes]]:
    """Yield (parsed block, raw segment bytes) pairs from log bytes.

    Raises LogFormatError on structural damage; JSON-level damage raises
    ValueError from the JSON parser and is the caller's concern.
    """
    import json

    header_len = len(LOG_MAGIC) + 1
    if len(data) < header_len:
        raise LogFormatError("log shorter than header")
    if data[: len(LOG_MAGIC)] != LOG_MAGIC:
        raise LogFormatError("bad log magic")
    if data[len(LOG_MAGIC)] != LOG_FORMAT_VERSION:
        raise LogFormatError("unsupported log format version")
    offset = header_len
    while offset < len(data):
        if offset + 8 > len(data):
            raise LogFormatError("truncated length prefix")
        (length,) = struct.unpack(">Q", data[offset : offset + 8])
        offset += 8
        if offset + length > len(data):
            raise LogFormatError("truncated block segment")
        raw = data[offset : offset + length]
        offset += length
        yield json.loads(raw.decode("utf-8")), raw
