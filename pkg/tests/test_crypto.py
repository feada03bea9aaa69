import dataclasses
import hashlib

import pytest

from chainsdn.crypto import (
    Drbg,
    DecryptReject,
    DifficultyTooHigh,
    NonMember,
    PuzzleSolution,
    SIM_GROUP,
    TEST_GROUP,
    ae_decrypt,
    ae_encrypt,
    ds_keygen,
    ds_sign,
    ds_verify,
    group_exp,
    keypair_from_secret,
    sha256,
    solve_puzzle,
    verify_puzzle,
)


def schoolbook_exp(base, exponent, p):
    acc = 1
    for _ in range(exponent):
        acc = (acc * base) % p
    return acc


class TestGroup:
    def test_params_structure(self):
        assert (TEST_GROUP.modulus_p - 1) % TEST_GROUP.order_q == 0
        assert pow(TEST_GROUP.generator_g, TEST_GROUP.order_q, TEST_GROUP.modulus_p) == 1
        assert pow(SIM_GROUP.generator_g, SIM_GROUP.order_q, SIM_GROUP.modulus_p) == 1
        assert SIM_GROUP.modulus_p.bit_length() >= 2048

    def test_exp_examples(self):
        assert group_exp(TEST_GROUP, 2, 0) == 1
        assert group_exp(TEST_GROUP, 2, 3) == 8
        assert group_exp(TEST_GROUP, 2, 3) == schoolbook_exp(2, 3, 23)
        assert group_exp(TEST_GROUP, 2, 11) == 1

    def test_exp_matches_schoolbook_everywhere(self):
        members = [x for x in range(1, 23) if pow(x, 11, 23) == 1]
        for base in members:
            for e in range(11):
                assert group_exp(TEST_GROUP, base, e) == schoolbook_exp(base, e, 23)

    def test_exp_respects_exponent_arithmetic(self):
        g = TEST_GROUP.generator_g
        for x in range(11):
            for y in range(11):
                assert group_exp(TEST_GROUP, group_exp(TEST_GROUP, g, x), y) == group_exp(
                    TEST_GROUP, g, (x * y) % 11
                )

    def test_non_member_rejected(self):
        # 5 is not a square mod 23, so it falls outside the order-11 subgroup.
        assert pow(5, 11, 23) != 1
        with pytest.raises(NonMember):
            group_exp(TEST_GROUP, 5, 2)
        with pytest.raises(NonMember):
            TEST_GROUP.check_public(1)


class TestKeygen:
    def test_deterministic(self):
        assert ds_keygen(TEST_GROUP, b"s1") == ds_keygen(TEST_GROUP, b"s1")

    def test_public_matches_secret(self):
        kp = ds_keygen(TEST_GROUP, b"s1")
        assert group_exp(TEST_GROUP, TEST_GROUP.generator_g, kp.secret) == kp.public

    def test_distinct_seeds_distinct_secrets(self):
        # On the big group the secrets are 256-bit draws; collisions would
        # mean the seed derivation is broken.
        secrets = {ds_keygen(SIM_GROUP, b"seed-%d" % i).secret for i in range(1000)}
        assert len(secrets) == 1000

    def test_keypair_from_secret_validates(self):
        with pytest.raises(ValueError):
            keypair_from_secret(TEST_GROUP, 0)
        with pytest.raises(ValueError):
            keypair_from_secret(TEST_GROUP, 11)


class TestSignatures:
    def test_round_trip(self):
        kp = ds_keygen(TEST_GROUP, b"signer")
        sig = ds_sign(kp, b"message")
        assert ds_verify(TEST_GROUP, kp.public, b"message", sig)

    def test_deterministic_by_default_fresh_on_request(self):
        # Distinctness of fresh signatures needs the big group; the test
        # group has only ten possible nonces.
        kp = ds_keygen(SIM_GROUP, b"signer")
        a = ds_sign(kp, b"m")
        b = ds_sign(kp, b"m")
        c = ds_sign(kp, b"m", nonce_seed=b"fresh-1")
        d = ds_sign(kp, b"m", nonce_seed=b"fresh-2")
        assert a == b
        assert c != d and c != a
        for sig in (a, c, d):
            assert ds_verify(SIM_GROUP, kp.public, b"m", sig)

    def test_tamper_fuzz_zero_acceptance(self):
        kp = ds_keygen(TEST_GROUP, b"signer")
        rng = Drbg(b"tamper")
        accepted = 0
        for i in range(1000):
            msg = rng.take(24)
            sig = ds_sign(kp, msg)
            bit = rng.uint(len(msg) * 8)
            flipped = bytearray(msg)
            flipped[bit // 8] ^= 1 << (bit % 8)
            if ds_verify(TEST_GROUP, kp.public, bytes(flipped), sig):
                accepted += 1
        assert accepted == 0

    def test_wrong_key_fuzz_zero_acceptance(self):
        rng = Drbg(b"wrongkey")
        accepted = 0
        for i in range(1000):
            signer = ds_keygen(TEST_GROUP, rng.take(8))
            other = ds_keygen(TEST_GROUP, rng.take(8))
            msg = rng.take(16)
            sig = ds_sign(signer, msg)
            if other.public != signer.public and ds_verify(TEST_GROUP, other.public, msg, sig):
                accepted += 1
        assert accepted == 0

    def test_verify_never_raises(self):
        kp = ds_keygen(TEST_GROUP, b"signer")
        from chainsdn.crypto import Signature

        assert not ds_verify(TEST_GROUP, kp.public, b"m", Signature(-1, 5))
        assert not ds_verify(TEST_GROUP, kp.public, b"m", Signature(3, 10**9))
        assert not ds_verify(TEST_GROUP, 5, b"m", ds_sign(kp, b"m"))  # non-member key
        assert not ds_verify(TEST_GROUP, kp.public, b"m", "not a signature")


class TestHybridEncryption:
    def test_empty_round_trip(self):
        kp = ds_keygen(SIM_GROUP, b"recipient")
        assert ae_decrypt(kp, ae_encrypt(SIM_GROUP, kp.public, b"")) == b""

    def test_random_payload_round_trip(self):
        kp = ds_keygen(SIM_GROUP, b"recipient")
        rng = Drbg(b"payloads")
        for _ in range(20):
            payload = rng.take(1024)
            assert ae_decrypt(kp, ae_encrypt(SIM_GROUP, kp.public, payload, rng)) == payload

    def test_fresh_ciphertexts(self):
        kp = ds_keygen(SIM_GROUP, b"recipient")
        a = ae_encrypt(SIM_GROUP, kp.public, b"x")
        b = ae_encrypt(SIM_GROUP, kp.public, b"x")
        assert a != b

    def test_single_bit_tamper_rejected(self):
        kp = ds_keygen(TEST_GROUP, b"recipient")
        rng = Drbg(b"bitflips")
        for _ in range(300):
            ct = ae_encrypt(TEST_GROUP, kp.public, rng.take(32), rng)
            bit = rng.uint(len(ct.payload) * 8)
            flipped = bytearray(ct.payload)
            flipped[bit // 8] ^= 1 << (bit % 8)
            with pytest.raises(DecryptReject):
                ae_decrypt(kp, dataclasses.replace(ct, payload=bytes(flipped)))

    def test_wrong_key_rejected(self):
        kp = ds_keygen(SIM_GROUP, b"recipient")
        other = ds_keygen(SIM_GROUP, b"other")
        ct = ae_encrypt(SIM_GROUP, kp.public, b"secret")
        with pytest.raises(DecryptReject):
            ae_decrypt(other, ct)

    def test_oversized_plaintext(self):
        kp = ds_keygen(SIM_GROUP, b"recipient")
        with pytest.raises(ValueError):
            ae_encrypt(SIM_GROUP, kp.public, b"\x00" * (64 * 1024 + 1))


class TestPuzzle:
    def test_difficulty_zero_nonce_zero(self):
        sol = solve_puzzle(b"id", 0)
        assert sol.nonce == 0
        assert verify_puzzle(sol)

    def test_difficulty_8(self):
        sol = solve_puzzle(b"switch-1", 8)
        assert verify_puzzle(sol)
        assert sol.nonce < 2**13  # expected around 2**8 trials

    def test_altered_subject_fails(self):
        rng = Drbg(b"subjects")
        false_accepts = 0
        for i in range(1000):
            subject = rng.take(6)
            sol = solve_puzzle(subject, 8)
            altered = dataclasses.replace(sol, subject_id=subject + b"x")
            if verify_puzzle(altered):
                false_accepts += 1
        assert false_accepts <= 8  # ~ 2**-8 per trial

    def test_difficulty_bound(self):
        with pytest.raises(DifficultyTooHigh):
            solve_puzzle(b"id", 25)
        assert not verify_puzzle(PuzzleSolution(b"id", 0, 25))


def test_sha256_golden_vector():
    # The hash backing every digest in the system is plain SHA-256.
    assert sha256(b"abc").hex() == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    )
    assert sha256(b"a", b"bc") == hashlib.sha256(b"abc").digest()


def test_drbg_reproducible_and_labeled():
    assert Drbg(b"s").take(32) == Drbg(b"s").take(32)
    assert Drbg(b"s", b"a").take(8) != Drbg(b"s", b"b").take(8)
    scalars = {Drbg(b"s-%d" % i).scalar(TEST_GROUP) for i in range(64)}
    assert scalars <= set(range(1, 11))
