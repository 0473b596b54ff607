"""Canonical encodings: golden bytes, injectivity, JSON round trips."""

import hashlib
import json
import struct

import pytest
from hypothesis import given, strategies as st

from scfledger.canonical import (
    canonical_encode,
    canonical_json_bytes,
    digest_value,
    sha256_hex,
)


def reference_encode(tag, fields):
    """Independent reconstruction of the byte layout with struct only."""
    out = bytearray(tag.encode("ascii"))
    for name, value in fields:
        nb = name.encode("ascii")
        out += struct.pack(">Q", len(nb)) + nb + struct.pack(">Q", len(value)) + value
    return bytes(out)


def test_empty_field_list_is_bare_tag():
    assert canonical_encode("t", []) == b"t"


def test_length_prefixes_force_injectivity():
    a = canonical_encode("x", [("a", b"b")])
    b = canonical_encode("x", [("ab", b"")])
    assert a != b


def test_matches_reference_layout():
    fields = [("userName", b"Sp1"), ("pubKey", b"\x00" * 32)]
    assert canonical_encode("user", fields) == reference_encode("user", fields)


def test_golden_user_digest():
    # pinned from the independent struct+hashlib oracle
    data = canonical_encode("user", [("userName", b"Sp1"), ("pubKey", b"\x00" * 32)])
    assert sha256_hex(data) == (
        "88a152e6ad6265651a05190e44a58a4076ed0f02318b8ae9c466df238e965591"
    )


field_lists = st.lists(
    st.tuples(st.text(alphabet="abcdefgh", max_size=6), st.binary(max_size=12)),
    max_size=6,
)


@given(field_lists, field_lists)
def test_injectivity_property(fields_a, fields_b):
    if fields_a != fields_b:
        assert canonical_encode("t", fields_a) != canonical_encode("t", fields_b)
    else:
        assert canonical_encode("t", fields_a) == canonical_encode("t", fields_b)


def test_canonical_json_golden():
    assert canonical_json_bytes({"b": 1, "a": [2, "x"]}) == b'{"a":[2,"x"],"b":1}'


def test_canonical_json_unicode_passthrough():
    data = canonical_json_bytes({"name": "供应链"})
    assert "供应链".encode("utf-8") in data


def test_canonical_json_rejects_nan():
    with pytest.raises(ValueError):
        canonical_json_bytes(float("nan"))


json_values = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(min_value=-(2**53), max_value=2**53)
    | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(max_size=20),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=8), children, max_size=4),
    max_leaves=20,
)


@given(json_values)
def test_canonical_json_round_trip(value):
    assert json.loads(canonical_json_bytes(value).decode("utf-8")) == value


def test_digest_value_is_sha256_of_canonical_bytes():
    value = {"k": [1, 2, 3]}
    assert digest_value(value) == hashlib.sha256(canonical_json_bytes(value)).hexdigest()
