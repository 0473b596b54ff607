"""CA, certificates, envelopes, checkUser, and signature robustness."""

import random

import pytest

from scfledger.domain import User, UserType
from scfledger.errors import (
    BadSignatureError,
    ExpiredCertificateError,
    TypeMismatchError,
    UnknownUserError,
)
from scfledger.identity import (
    AnonCredential,
    Certificate,
    CertificateAuthority,
    KeyPair,
    check_user,
    make_envelope,
    verify_envelope,
)

SEED = b"ca-seed-000000000000"


@pytest.fixture
def ca():
    return CertificateAuthority(SEED)


def user_keypair(tag=b"user"):
    return KeyPair.from_seed(b"user-seed-" + tag + b"-0000000000")


class TestCaInit:
    def test_same_seed_same_root(self):
        assert (
            CertificateAuthority(SEED).root_public_bytes
            == CertificateAuthority(SEED).root_public_bytes
        )

    def test_different_seeds_differ(self):
        other = CertificateAuthority(b"ca-seed-111111111111")
        assert CertificateAuthority(SEED).root_public_bytes != other.root_public_bytes

    def test_short_seed_rejected(self):
        with pytest.raises(ValueError, match="16 bytes"):
            CertificateAuthority(b"8bytes!!")


class TestIssuance:
    def test_issue_then_verify(self, ca):
        kp = user_keypair()
        cert = ca.issue("a" * 64, UserType.SUPPLIER, kp.public_bytes, 0, 1000)
        assert ca.verify_certificate(cert)

    def test_flipped_signature_fails(self, ca):
        kp = user_keypair()
        cert = ca.issue("a" * 64, UserType.SUPPLIER, kp.public_bytes, 0, 1000)
        sig = bytearray(bytes.fromhex(cert.ca_signature))
        sig[0] ^= 0x01
        tampered = Certificate(
            cert.serial, cert.subject_user_number, cert.subject_type,
            cert.pub_key, cert.not_before, cert.not_after, bytes(sig).hex(),
        )
        assert not ca.verify_certificate(tampered)

    def test_serials_strictly_increase(self, ca):
        kp = user_keypair()
        a = ca.issue("a" * 64, UserType.SUPPLIER, kp.public_bytes, 0, 1000)
        b = ca.issue("b" * 64, UserType.SUPPLIER, kp.public_bytes, 0, 1000)
        assert b.serial > a.serial

    def test_empty_window_rejected(self, ca):
        with pytest.raises(ValueError, match="window"):
            ca.issue("a" * 64, UserType.SUPPLIER, user_keypair().public_bytes, 10, 10)

    def test_round_trip(self, ca):
        cert = ca.issue("a" * 64, None, user_keypair().public_bytes, 0, 1000)
        assert Certificate.from_json(cert.to_json()) == cert


def signed_fixture(ca, now=100):
    kp = user_keypair()
    number = "a" * 64
    cert = ca.issue(number, UserType.SUPPLIER, kp.public_bytes, 0, 1000)
    env = make_envelope(kp, number, b'{"method":"x"}', b"\x01" * 16, now)
    return kp, number, cert, env


class TestVerifyEnvelope:
    def test_valid(self, ca):
        _, _, cert, env = signed_fixture(ca)
        assert verify_envelope(env, cert, now_s=100)

    def test_expired_certificate(self, ca):
        _, _, cert, env = signed_fixture(ca)
        assert not verify_envelope(env, cert, now_s=1001)

    def test_signer_mismatch(self, ca):
        kp, _, cert, _ = signed_fixture(ca)
        env = make_envelope(kp, "b" * 64, b"{}", b"\x01" * 16, 100)
        assert not verify_envelope(env, cert, now_s=100)

    def test_wrong_nonce_breaks_signature(self, ca):
        kp, number, cert, env = signed_fixture(ca)
        from scfledger.identity import SignedEnvelope

        forged = SignedEnvelope(env.payload, number, env.signature, b"\x02" * 16, 100)
        assert not verify_envelope(forged, cert, now_s=100)


class TestCheckUser:
    def build_world(self, ca):
        kp, number, cert, env = signed_fixture(ca)
        user = User("Sp1", UserType.SUPPLIER, number, kp.public_bytes.hex())
        world = {"user:" + number: user.to_json()}
        return world, env, number

    def test_ok(self, ca):
        world, env, _ = self.build_world(ca)
        user = check_user(env, UserType.SUPPLIER, world.get, ca.certificate_for, 100)
        assert user.user_name == "Sp1"

    def test_type_mismatch(self, ca):
        world, env, _ = self.build_world(ca)
        with pytest.raises(TypeMismatchError):
            check_user(env, UserType.CORE_ENTERPRISE, world.get, ca.certificate_for, 100)

    def test_unknown_user(self, ca):
        _, env, _ = self.build_world(ca)
        with pytest.raises(UnknownUserError):
            check_user(env, UserType.SUPPLIER, {}.get, ca.certificate_for, 100)

    def test_expired_certificate(self, ca):
        world, env, _ = self.build_world(ca)
        with pytest.raises(ExpiredCertificateError):
            check_user(env, UserType.SUPPLIER, world.get, ca.certificate_for, 5000)

    def test_bad_signature(self, ca):
        world, env, number = self.build_world(ca)
        from scfledger.identity import SignedEnvelope

        forged = SignedEnvelope(b'{"method":"y"}', number, env.signature, env.nonce, 100)
        with pytest.raises(BadSignatureError):
            check_user(forged, UserType.SUPPLIER, world.get, ca.certificate_for, 100)


def test_sign_verify_and_corruption_1000_cases():
    """Random payloads round-trip; any single-bit corruption fails."""
    rng = random.Random(20240)
    kp = user_keypair()
    cert = Certificate(1, "a" * 64, UserType.SUPPLIER, kp.public_bytes.hex(), 0, 10**9, "")
    for _ in range(1000):
        payload = rng.randbytes(rng.randint(1, 64))
        nonce = rng.randbytes(16)
        ts = rng.randint(0, 10**8)
        env = make_envelope(kp, "a" * 64, payload, nonce, ts)
        assert verify_envelope(env, cert, now_s=ts)
        # corrupt one random bit of payload or signature
        from scfledger.identity import SignedEnvelope

        if rng.random() < 0.5:
            buf = bytearray(payload)
            buf[rng.randrange(len(buf))] ^= 1 << rng.randint(0, 7)
            mutated = SignedEnvelope(bytes(buf), "a" * 64, env.signature, nonce, ts)
        else:
            buf = bytearray(env.signature)
            buf[rng.randrange(len(buf))] ^= 1 << rng.randint(0, 7)
            mutated = SignedEnvelope(payload, "a" * 64, bytes(buf), nonce, ts)
        assert not verify_envelope(mutated, cert, now_s=ts)


def test_anon_credential_recomputation():
    cred = AnonCredential.create("a" * 64, b"\x05" * 16)
    assert len(bytes.fromhex(cred.blinded_tag)) == 32
    assert cred.verify(b"\x05" * 16)
    assert not cred.verify(b"\x06" * 16)


def test_envelope_round_trip(ca):
    _, _, _, env = signed_fixture(ca)
    from scfledger.identity import SignedEnvelope

    assert SignedEnvelope.from_json(env.to_json()) == env
