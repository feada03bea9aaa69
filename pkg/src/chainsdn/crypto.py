"""Group arithmetic, signatures, hybrid encryption, and the anti-spoofing puzzle.

Everything here is deterministic when handed an explicit seed, which is what
makes whole simulation runs replayable. All hashing is SHA-256 behind short
domain-separation prefixes so the puzzle, block, key-derivation, and challenge
uses can never collide.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .encoding import frame, pack, register_record, Reader

# Domain separation prefixes.
DOMAIN_BLOCK = b"BLK"
DOMAIN_PUZZLE = b"PUZ"
DOMAIN_KDF = b"KDF"
DOMAIN_CHALLENGE = b"EXP"
DOMAIN_TX = b"TX"
DOMAIN_SIG = b"SIG"
DOMAIN_RNG = b"RNG"

PUZZLE_MAX_DIFFICULTY = 24
AE_MAX_PLAINTEXT = 64 * 1024


class NonMember(Exception):
    """A value failed the prime-order subgroup membership check."""


class DecryptReject(Exception):
    """Authenticated decryption failed: wrong key or tampered ciphertext."""


class DifficultyTooHigh(Exception):
    """Puzzle difficulty above the desk-scale bound."""


def sha256(*chunks: bytes) -> bytes:
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return h.digest()


class Drbg:
    """Counter-mode SHA-256 generator; a fixed seed yields a fixed stream."""

    def __init__(self, seed: bytes, label: bytes = b""):
        if not seed:
            raise ValueError("empty seed")
        self._key = sha256(DOMAIN_RNG, frame(label), frame(seed))
        self._counter = 0
        self._buffer = b""

    def take(self, n: int) -> bytes:
        while len(self._buffer) < n:
            block = sha256(self._key, self._counter.to_bytes(8, "big"))
            self._counter += 1
            self._buffer += block
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def uint(self, bound: int) -> int:
        """Uniform-ish integer in [0, bound): 2x-width draw reduced mod bound."""
        width = (bound.bit_length() + 7) // 8 * 2
        return int.from_bytes(self.take(width), "big") % bound

    def scalar(self, params: "GroupParams") -> int:
        """Nonzero exponent for the group, honoring its short-exponent setting."""
        if params.exponent_bits and params.exponent_bits < params.order_q.bit_length():
            return int.from_bytes(self.take(params.exponent_bits // 8), "big") or 1
        return self.uint(params.order_q - 1) + 1


def fresh_drbg() -> Drbg:
    """Non-reproducible generator for callers outside a seeded simulation."""
    return Drbg(secrets.token_bytes(32))


@dataclass(frozen=True)
class GroupParams:
    """Schnorr group: prime modulus, prime subgroup order, generator.

    exponent_bits caps the width of freshly drawn exponents (short-exponent
    discrete log); None means full width.
    """

    modulus_p: int
    order_q: int
    generator_g: int
    exponent_bits: int | None = None

    def is_member(self, x: int) -> bool:
        return 1 <= x < self.modulus_p and pow(x, self.order_q, self.modulus_p) == 1

    def check_public(self, x: int) -> None:
        """Membership check for key material: identity element is rejected."""
        if x == 1 or not self.is_member(x):
            raise NonMember("value is not a non-identity subgroup member")


# Tiny group where every example can be checked by hand.
TEST_GROUP = GroupParams(modulus_p=23, order_q=11, generator_g=2)

# RFC 3526 2048-bit MODP prime; it is a safe prime and 2 generates the
# order-(p-1)/2 subgroup of squares. 256-bit exponents keep operations fast.
_MODP_2048 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
SIM_GROUP = GroupParams(
    modulus_p=_MODP_2048,
    order_q=(_MODP_2048 - 1) // 2,
    generator_g=2,
    exponent_bits=256,
)


def group_exp(params: GroupParams, base: int, exponent: int) -> int:
    """base**exponent in the subgroup; base must be a member."""
    if not params.is_member(base):
        raise NonMember(f"base {base} is outside the order-q subgroup")
    return pow(base, exponent % params.order_q, params.modulus_p)


@dataclass(frozen=True)
class KeyPair:
    params: GroupParams
    secret: int
    public: int


def ds_keygen(params: GroupParams, rng_seed: bytes) -> KeyPair:
    """Derive a keypair from a seed; the same seed always gives the same keys."""
    secret = Drbg(rng_seed, b"keygen").scalar(params)
    return KeyPair(params, secret, pow(params.generator_g, secret, params.modulus_p))


def keypair_from_secret(params: GroupParams, secret: int) -> KeyPair:
    if not 1 <= secret < params.order_q:
        raise ValueError("secret outside [1, q-1]")
    return KeyPair(params, secret, pow(params.generator_g, secret, params.modulus_p))


@dataclass(frozen=True)
class Signature:
    """Schnorr signature in challenge/response form.

    The challenge is kept at full hash width (not reduced mod q) so that
    acceptance of a tampered message requires a full SHA-256 collision even
    on the tiny test group.
    """

    commitment: int
    response: int


def _sig_challenge(params: GroupParams, R: int, message: bytes) -> int:
    digest = sha256(DOMAIN_SIG, pack(R, message))
    return int.from_bytes(digest, "big")


def _reduce_challenge(params: GroupParams, e_full: int) -> int:
    # Nonzero in [1, q-1]: a zero challenge would cancel the public key out
    # of the verification equation, which matters on the tiny test group.
    return e_full % (params.order_q - 1) + 1


def ds_sign(keys: KeyPair, message: bytes, nonce_seed: bytes | None = None) -> Signature:
    """Sign canonical message bytes.

    The nonce is bound to (secret, message) by default, which makes signing
    deterministic; passing nonce_seed gives a fresh randomized signature.
    """
    params = keys.params
    if nonce_seed is None:
        nonce_seed = sha256(pack(keys.secret, message))
    k = Drbg(nonce_seed, b"signonce").scalar(params)
    R = pow(params.generator_g, k, params.modulus_p)
    e_full = _sig_challenge(params, R, message)
    e = _reduce_challenge(params, e_full)
    s = (k + e * keys.secret) % params.order_q
    return Signature(commitment=e_full, response=s)


def ds_verify(params: GroupParams, public: int, message: bytes, sig: Signature) -> bool:
    """True iff sig was produced over message by the holder of public's secret.

    Never raises: malformed values simply fail verification.
    """
    if not isinstance(sig, Signature):
        return False
    if not (0 <= sig.response < params.order_q and sig.commitment >= 0):
        return False
    if not params.is_member(public):
        return False
    e = _reduce_challenge(params, sig.commitment)
    # R = g^s * public^(-e); the inverse keeps exponents short.
    pe = pow(public, e, params.modulus_p)
    R = pow(params.generator_g, sig.response, params.modulus_p) * pow(pe, -1, params.modulus_p)
    R %= params.modulus_p
    return _sig_challenge(params, R, message) == sig.commitment


@dataclass(frozen=True)
class HybridCiphertext:
    key_encapsulation: int
    payload: bytes


def _sym_key(params: GroupParams, shared: int, encap: int) -> bytes:
    return sha256(DOMAIN_KDF, pack(shared, encap))


def symmetric_encrypt(key32: bytes, plaintext: bytes, rng: Drbg | None = None) -> bytes:
    """AES-GCM with the 12-byte nonce prepended."""
    nonce = (rng or fresh_drbg()).take(12)
    return nonce + AESGCM(key32).encrypt(nonce, plaintext, None)


def symmetric_decrypt(key32: bytes, blob: bytes) -> bytes:
    if len(blob) < 12 + 16:
        raise DecryptReject("ciphertext too short")
    try:
        return AESGCM(key32).decrypt(blob[:12], blob[12:], None)
    except InvalidTag as exc:
        raise DecryptReject("authentication failed") from exc


def ae_encrypt(
    params: GroupParams, public: int, plaintext: bytes, rng: Drbg | None = None
) -> HybridCiphertext:
    """Hybrid encryption: DH encapsulation against public, then AES-GCM."""
    if len(plaintext) > AE_MAX_PLAINTEXT:
        raise ValueError("plaintext exceeds ledger payload bound")
    params.check_public(public)
    rng = rng or fresh_drbg()
    r = rng.scalar(params)
    encap = pow(params.generator_g, r, params.modulus_p)
    shared = pow(public, r, params.modulus_p)
    key = _sym_key(params, shared, encap)
    return HybridCiphertext(encap, symmetric_encrypt(key, plaintext, rng))


def ae_decrypt(keys: KeyPair, ct: HybridCiphertext) -> bytes:
    params = keys.params
    if not params.is_member(ct.key_encapsulation) or ct.key_encapsulation == 1:
        raise DecryptReject("bad key encapsulation")
    shared = pow(ct.key_encapsulation, keys.secret, params.modulus_p)
    return symmetric_decrypt(_sym_key(params, shared, ct.key_encapsulation), ct.payload)


@dataclass(frozen=True)
class PuzzleSolution:
    subject_id: bytes
    nonce: int
    difficulty: int


def _puzzle_digest(subject_id: bytes, nonce: int) -> bytes:
    return sha256(DOMAIN_PUZZLE, frame(subject_id), nonce.to_bytes(8, "big"))


def _leading_zero_bits(digest: bytes) -> int:
    bits = 0
    for byte in digest:
        if byte == 0:
            bits += 8
            continue
        bits += 8 - byte.bit_length()
        break
    return bits


def solve_puzzle(subject_id: bytes, difficulty: int) -> PuzzleSolution:
    """Search nonces until the digest has the required leading zero bits."""
    if difficulty > PUZZLE_MAX_DIFFICULTY:
        raise DifficultyTooHigh(f"difficulty {difficulty} > {PUZZLE_MAX_DIFFICULTY}")
    nonce = 0
    while _leading_zero_bits(_puzzle_digest(subject_id, nonce)) < difficulty:
        nonce += 1
    return PuzzleSolution(subject_id, nonce, difficulty)


def verify_puzzle(sol: PuzzleSolution) -> bool:
    if not 0 <= sol.nonce < 2**64 or sol.difficulty < 0:
        return False
    if sol.difficulty > PUZZLE_MAX_DIFFICULTY:
        return False
    return _leading_zero_bits(_puzzle_digest(sol.subject_id, sol.nonce)) >= sol.difficulty


def _decode_signature(r: Reader) -> Signature:
    return Signature(commitment=r.read_uint(), response=r.read_uint())


def _decode_hct(r: Reader) -> HybridCiphertext:
    return HybridCiphertext(key_encapsulation=r.read_uint(), payload=r.read_bytes())


def _decode_puzzle(r: Reader) -> PuzzleSolution:
    return PuzzleSolution(subject_id=r.read_bytes(), nonce=r.read_uint(), difficulty=r.read_uint())


register_record(Signature, 11, decoder=_decode_signature)
register_record(HybridCiphertext, 12, decoder=_decode_hct)
register_record(PuzzleSolution, 13, decoder=_decode_puzzle)
