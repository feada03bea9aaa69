"""One-pass authenticated key exchange between a switch and a controller.

The switch is the sender: it contributes the single ephemeral group element Y
and the whole transcript is (sender_id, receiver_id, Y). Both sides derive the
same 32-byte session key because

    sigma  = receiver_pk ** (y + e * sender_secret)        (sender side)
    sigma' = (Y * sender_pk ** e) ** receiver_secret       (receiver side)

are the same group element, with e hashed from (Y, receiver_id). Identities
enter the key derivation in canonical (sender, receiver) order on both sides.

Replay defense and key-update handling live in the protocol layer; this module
is the pure exchange and validates subgroup membership of everything it is
handed, rejecting the identity element.
"""

from __future__ import annotations

from dataclasses import dataclass

from .crypto import (
    DOMAIN_CHALLENGE,
    DOMAIN_KDF,
    Drbg,
    GroupParams,
    KeyPair,
    sha256,
)
from .encoding import pack


@dataclass(frozen=True)
class SessionContext:
    ephemeral_Y: int
    session_key: bytes
    session_id: tuple[bytes, bytes, int]
    challenge_e: int


def challenge(params: GroupParams, ephemeral_Y: int, receiver_id: bytes) -> int:
    """e = H'(Y, receiver_id), reduced into the exponent group."""
    digest = sha256(DOMAIN_CHALLENGE, pack(ephemeral_Y, receiver_id))
    return int.from_bytes(digest, "big") % params.order_q


def _derive_key(sigma: int, sender_id: bytes, receiver_id: bytes, ephemeral_Y: int) -> bytes:
    return sha256(DOMAIN_KDF, pack(sigma, sender_id, receiver_id, ephemeral_Y))


def _context(
    params: GroupParams,
    sigma: int,
    sender_id: bytes,
    receiver_id: bytes,
    ephemeral_Y: int,
) -> SessionContext:
    return SessionContext(
        ephemeral_Y=ephemeral_Y,
        session_key=_derive_key(sigma, sender_id, receiver_id, ephemeral_Y),
        session_id=(sender_id, receiver_id, ephemeral_Y),
        challenge_e=challenge(params, ephemeral_Y, receiver_id),
    )


def initiate_with_ephemeral(
    sender_keys: KeyPair,
    receiver_pk: int,
    sender_id: bytes,
    receiver_id: bytes,
    y: int,
) -> tuple[int, SessionContext]:
    """Sender side with an explicit ephemeral exponent (the algebraic core)."""
    params = sender_keys.params
    params.check_public(receiver_pk)
    Y = pow(params.generator_g, y, params.modulus_p)
    e = challenge(params, Y, receiver_id)
    exponent = (y + e * sender_keys.secret) % params.order_q
    sigma = pow(receiver_pk, exponent, params.modulus_p)
    return Y, _context(params, sigma, sender_id, receiver_id, Y)


def homqv_initiate(
    sender_keys: KeyPair,
    receiver_pk: int,
    sender_id: bytes,
    receiver_id: bytes,
    rng_seed: bytes,
) -> tuple[int, SessionContext]:
    """Start a session: returns the ephemeral Y to transmit plus the context."""
    y = Drbg(rng_seed, b"homqv").scalar(sender_keys.params)
    return initiate_with_ephemeral(sender_keys, receiver_pk, sender_id, receiver_id, y)


def homqv_respond(
    receiver_keys: KeyPair,
    sender_pk: int,
    ephemeral_Y: int,
    sender_id: bytes,
    receiver_id: bytes,
) -> SessionContext:
    """Receiver side: accepts (Y, identities), no message is sent back."""
    params = receiver_keys.params
    params.check_public(sender_pk)
    params.check_public(ephemeral_Y)
    e = challenge(params, ephemeral_Y, receiver_id)
    base = (ephemeral_Y * pow(sender_pk, e, params.modulus_p)) % params.modulus_p
    sigma = pow(base, receiver_keys.secret, params.modulus_p)
    return _context(params, sigma, sender_id, receiver_id, ephemeral_Y)


def transcript_bytes(sender_id: bytes, receiver_id: bytes, ephemeral_Y: int) -> bytes:
    """Canonical bytes of the one-pass transcript carried in connection requests."""
    return pack(sender_id, receiver_id, ephemeral_Y)
