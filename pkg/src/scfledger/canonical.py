"""Canonical byte encodings and digests shared by every on-ledger record.

Two encodings cover all hashing and serialization needs:

* Canonical JSON: UTF-8, keys sorted, no insignificant whitespace. This is
  the bit-exact wire format and hash input for records that travel as JSON
  (transactions, blocks, certificates, policies).
* Length-prefixed field encoding: a domain-separation tag followed by
  (name, value) pairs, each length-prefixed with an 8-byte big-endian
  count. Used for identifier derivation, where plain string concatenation
  would make distinct inputs collide.
"""

from __future__ import annotations

import hashlib
import json
import struct
from typing import Iterable, Tuple

ZERO_DIGEST = "0" * 64
ZERO_HASH = b"\x00" * 32


def canonical_json_bytes(value) -> bytes:
    """Serialize a JSON-safe value to its canonical byte form."""
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def canonical_encode(tag: str, fields: Iterable[Tuple[str, bytes]]) -> bytes:
    """Deterministic, injective encoding of named byte fields.

    Layout: the ASCII tag verbatim, then for each field the name length
    (8-byte big-endian), the name, the value length (8-byte big-endian),
    and the value. Length prefixes make the encoding injective for a
    fixed tag.
    """
    out = bytearray(tag.encode("ascii"))
    for name, value in fields:
        name_bytes = name.encode("ascii")
        out += struct.pack(">Q", len(name_bytes))
        out += name_bytes
        out += struct.pack(">Q", len(value))
        out += value
    return bytes(out)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_raw(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def digest_value(value) -> str:
    """Hex digest of a JSON-safe value's canonical encoding."""
    return sha256_hex(canonical_json_bytes(value))


def is_hex_digest(s: object) -> bool:
    """True for a 64-char lowercase hex string (a rendered SHA-256)."""
    if not isinstance(s, str) or len(s) != 64:
        return False
    return all(c in "0123456789abcdef" for c in s)
