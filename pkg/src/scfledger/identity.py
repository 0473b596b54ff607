"""Simulated certificate authority and request-signing layer.

Signatures are Ed25519 (deterministic, 64 bytes, 32-byte keys). The CA is
a single logical authority: it derives its root keypair from a seed so
test fixtures are reproducible, issues leaf certificates with strictly
increasing serials, and keeps the registry of issued certificates that
request verification consults. No certificate may issue further
certificates; chain depth is exactly one.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass
from typing import Callable, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    PublicFormat,
)

from .canonical import canonical_encode, canonical_json_bytes, sha256_hex, sha256_raw
from .domain import User, UserType
from .errors import (
    BadSignatureError,
    ExpiredCertificateError,
    TypeMismatchError,
    UnknownUserError,
)

MIN_SEED_LEN = 16
NONCE_LEN = 16
SIGNATURE_LEN = 64


@dataclass(frozen=True)
class KeyPair:
    """Ed25519 signing keypair; construct via :meth:`from_seed`."""

    _private: Ed25519PrivateKey

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        if len(seed) < MIN_SEED_LEN:
            raise ValueError(f"seed must be at least {MIN_SEED_LEN} bytes")
        return cls(Ed25519PrivateKey.from_private_bytes(sha256_raw(seed)))

    @property
    def public_bytes(self) -> bytes:
        return self._private.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)

    def sign(self, message: bytes) -> bytes:
        return self._private.sign(message)


def verify_signature(pub_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(pub_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


@dataclass(frozen=True)
class Certificate:
    serial: int
    subject_user_number: str
    subject_type: Optional[UserType]  # None marks the administrative identity
    pub_key: str  # hex
    not_before: int  # UTC seconds
    not_after: int  # UTC seconds
    ca_signature: str  # hex, 64 bytes

    def signing_bytes(self) -> bytes:
        body = self.to_json()
        body.pop("caSignature")
        return canonical_json_bytes(body)

    def to_json(self) -> dict:
        return {
            "serial": self.serial,
            "subjectUserNumber": self.subject_user_number,
            "subjectType": self.subject_type.value if self.subject_type else None,
            "pubKey": self.pub_key,
            "notBefore": self.not_before,
            "notAfter": self.not_after,
            "caSignature": self.ca_signature,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Certificate":
        raw_type = data["subjectType"]
        return cls(
            serial=data["serial"],
            subject_user_number=data["subjectUserNumber"],
            subject_type=UserType.parse(raw_type) if raw_type else None,
            pub_key=data["pubKey"],
            not_before=data["notBefore"],
            not_after=data["notAfter"],
            ca_signature=data["caSignature"],
        )

    def valid_at(self, now_s: int) -> bool:
        return self.not_before <= now_s <= self.not_after


class CertificateAuthority:
    """Root of the one-level certificate hierarchy.

    Issuance is serialized behind a lock so serials stay strictly
    monotonic under concurrent enrollment; verification is pure.
    """

    def __init__(self, seed: bytes):
        if len(seed) < MIN_SEED_LEN:
            raise ValueError(f"CA seed must be at least {MIN_SEED_LEN} bytes")
        self._root = KeyPair.from_seed(sha256_raw(seed + b"/ca-root"))
        self._serial = 0
        self._lock = threading.Lock()
        self._registry: dict[str, Certificate] = {}

    @property
    def root_public_bytes(self) -> bytes:
        return self._root.public_bytes

    def issue(
        self,
        subject_user_number: str,
        subject_type: Optional[UserType],
        pub_key: bytes,
        not_before: int,
        not_after: int,
    ) -> Certificate:
        if not_before >= not_after:
            raise ValueError("certificate validity window is empty")
        with self._lock:
            self._serial += 1
            unsigned = Certificate(
                serial=self._serial,
                subject_user_number=subject_user_number,
                subject_type=subject_type,
                pub_key=pub_key.hex(),
                not_before=not_before,
                not_after=not_after,
                ca_signature="",
            )
            signature = self._root.sign(unsigned.signing_bytes())
            cert = Certificate(
                serial=unsigned.serial,
                subject_user_number=subject_user_number,
                subject_type=subject_type,
                pub_key=pub_key.hex(),
                not_before=not_before,
                not_after=not_after,
                ca_signature=signature.hex(),
            )
            self._registry[subject_user_number] = cert
            return cert

    def certificate_for(self, user_number: str) -> Optional[Certificate]:
        return self._registry.get(user_number)

    def verify_certificate(self, cert: Certificate) -> bool:
        try:
            signature = bytes.fromhex(cert.ca_signature)
        except ValueError:
            return False
        return verify_signature(self.root_public_bytes, cert.signing_bytes(), signature)


@dataclass(frozen=True)
class SignedEnvelope:
    """A signed request: payload bytes bound to a signer, nonce, and time."""

    payload: bytes  # canonical JSON of the request body
    signer_user_number: str
    signature: bytes
    nonce: bytes
    timestamp: int  # UTC seconds

    def signing_bytes(self) -> bytes:
        return self.payload + self.nonce + struct.pack(">Q", self.timestamp)

    def to_json(self) -> dict:
        return {
            "payload": self.payload.decode("utf-8"),
            "signerUserNumber": self.signer_user_number,
            "signature": self.signature.hex(),
            "nonce": self.nonce.hex(),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SignedEnvelope":
        return cls(
            payload=data["payload"].encode("utf-8"),
            signer_user_number=data["signerUserNumber"],
            signature=bytes.fromhex(data["signature"]),
            nonce=bytes.fromhex(data["nonce"]),
            timestamp=data["timestamp"],
        )


def make_envelope(
    keypair: KeyPair,
    signer_user_number: str,
    payload: bytes,
    nonce: bytes,
    timestamp: int,
) -> SignedEnvelope:
    if len(nonce) != NONCE_LEN:
        raise ValueError(f"nonce must be {NONCE_LEN} bytes")
    env = SignedEnvelope(
        payload=payload,
        signer_user_number=signer_user_number,
        signature=b"",
        nonce=nonce,
        timestamp=timestamp,
    )
    signature = keypair.sign(env.signing_bytes())
    return SignedEnvelope(payload, signer_user_number, signature, nonce, timestamp)


def verify_envelope(env: SignedEnvelope, cert: Certificate, now_s: int) -> bool:
    """True iff the signature checks out, the certificate covers `now`,
    and the certificate subject is the claimed signer. Malformed inputs
    yield False rather than raising."""
    try:
        if cert.subject_user_number != env.signer_user_number:
            return False
        if not cert.valid_at(now_s):
            return False
        pub = bytes.fromhex(cert.pub_key)
        return verify_signature(pub, env.signing_bytes(), env.signature)
    except (ValueError, TypeError):
        return False


def check_user(
    env: SignedEnvelope,
    claimed_type: UserType,
    state_get: Callable[[str], Optional[dict]],
    cert_lookup: Callable[[str], Optional[Certificate]],
    now_s: int,
) -> User:
    """Authenticate an envelope and confirm the signer's registered type.

    Raises UnknownUserError, ExpiredCertificateError, BadSignatureError,
    or TypeMismatchError; returns the registered User on success. Private
    keys never reach this layer: possession is proven by the envelope
    signature alone.
    """
    record = state_get("user:" + env.signer_user_number)
    if record is None:
        raise UnknownUserError(f"no registered user {env.signer_user_number}")
    cert = cert_lookup(env.signer_user_number)
    if cert is None:
        raise UnknownUserError(f"no certificate for {env.signer_user_number}")
    if not cert.valid_at(now_s):
        raise ExpiredCertificateError(f"certificate expired for {env.signer_user_number}")
    if not verify_envelope(env, cert, now_s):
        raise BadSignatureError("envelope signature does not verify")
    user = User.from_json(record)
    if user.user_type != claimed_type:
        raise TypeMismatchError(
            f"registered type {user.user_type.value}, claimed {claimed_type.value}"
        )
    return user


@dataclass(frozen=True)
class AnonCredential:
    """Hash-commitment stub of an anonymous credential.

    The blinded tag commits to (userNumber, nonce); without the nonce the
    tag reveals nothing beyond its length.
    """

    holder_user_number: str
    blinded_tag: str  # hex

    @classmethod
    def create(cls, user_number: str, nonce: bytes) -> "AnonCredential":
        tag = sha256_hex(
            canonical_encode(
                "anon", [("userNumber", user_number.encode("ascii")), ("nonce", nonce)]
            )
        )
        return cls(holder_user_number=user_number, blinded_tag=tag)

    def verify(self, nonce: bytes) -> bool:
        return AnonCredential.create(self.holder_user_number, nonce) == self
