import pytest

from chainsdn.crypto import (
    DOMAIN_KDF,
    Drbg,
    NonMember,
    SIM_GROUP,
    TEST_GROUP,
    ds_keygen,
    keypair_from_secret,
    sha256,
)
from chainsdn.encoding import pack
from chainsdn.homqv import (
    challenge,
    homqv_initiate,
    homqv_respond,
    initiate_with_ephemeral,
    transcript_bytes,
)

SW, CTRL = b"switch-1", b"contr-1"


def oracle_key(a, b, y, sender_id, receiver_id):
    """Session key computed straight from the exponent algebra."""
    p, q, g = TEST_GROUP.modulus_p, TEST_GROUP.order_q, TEST_GROUP.generator_g
    Y = pow(g, y, p)
    e = challenge(TEST_GROUP, Y, receiver_id)
    sigma = pow(g, (a * (y + e * b)) % q, p)
    return sha256(DOMAIN_KDF, pack(sigma, sender_id, receiver_id, Y))


def test_paper_worked_example():
    # switch (sender) secret 3, controller (receiver) secret 4, ephemeral 5
    switch = keypair_from_secret(TEST_GROUP, 3)
    contr = keypair_from_secret(TEST_GROUP, 4)
    Y, sender_ctx = initiate_with_ephemeral(switch, contr.public, SW, CTRL, 5)
    receiver_ctx = homqv_respond(contr, switch.public, Y, SW, CTRL)
    assert sender_ctx.session_key == receiver_ctx.session_key
    assert sender_ctx.session_key == oracle_key(4, 3, 5, SW, CTRL)
    assert sender_ctx.session_id == (SW, CTRL, Y) == receiver_ctx.session_id


def test_agreement_sample_on_sim_group():
    switch = ds_keygen(SIM_GROUP, b"sw")
    contr = ds_keygen(SIM_GROUP, b"ct")
    Y, sender_ctx = homqv_initiate(switch, contr.public, SW, CTRL, b"eph-seed")
    receiver_ctx = homqv_respond(contr, switch.public, Y, SW, CTRL)
    assert sender_ctx.session_key == receiver_ctx.session_key


def test_deterministic_under_fixed_seed():
    switch = ds_keygen(TEST_GROUP, b"sw")
    contr = ds_keygen(TEST_GROUP, b"ct")
    first = homqv_initiate(switch, contr.public, SW, CTRL, b"seed")
    second = homqv_initiate(switch, contr.public, SW, CTRL, b"seed")
    assert first == second


def test_identity_element_rejected():
    switch = keypair_from_secret(TEST_GROUP, 3)
    contr = keypair_from_secret(TEST_GROUP, 4)
    with pytest.raises(NonMember):
        homqv_initiate(switch, 1, SW, CTRL, b"seed")
    with pytest.raises(NonMember):
        homqv_respond(contr, switch.public, 1, SW, CTRL)
    with pytest.raises(NonMember):
        homqv_respond(contr, 1, 2, SW, CTRL)


def test_non_member_rejected():
    contr = keypair_from_secret(TEST_GROUP, 4)
    # 5 is outside the order-11 subgroup of Z_23.
    with pytest.raises(NonMember):
        homqv_respond(contr, 5, 2, SW, CTRL)
    with pytest.raises(NonMember):
        homqv_respond(contr, 2, 5, SW, CTRL)


def test_tampered_ephemeral_changes_keys():
    p = TEST_GROUP.modulus_p
    rng = Drbg(b"tamper-homqv")
    matches = 0
    for i in range(1000):
        switch = ds_keygen(TEST_GROUP, rng.take(8))
        contr = ds_keygen(TEST_GROUP, rng.take(8))
        Y, sender_ctx = homqv_initiate(switch, contr.public, SW, CTRL, rng.take(8))
        tampered = (Y * TEST_GROUP.generator_g) % p
        if tampered == 1:
            continue
        receiver_ctx = homqv_respond(contr, switch.public, tampered, SW, CTRL)
        if receiver_ctx.session_key == sender_ctx.session_key:
            matches += 1
    assert matches == 0


def test_session_id_binding():
    switch = ds_keygen(TEST_GROUP, b"sw")
    contr = ds_keygen(TEST_GROUP, b"ct")
    rng = Drbg(b"ids")
    keys = set()
    for i in range(200):
        sender_id = bytes(rng.take(6))
        receiver_id = bytes(rng.take(6))
        _, ctx = initiate_with_ephemeral(switch, contr.public, sender_id, receiver_id, 5)
        keys.add(ctx.session_key)
    assert len(keys) == 200


def test_one_pass_transcript():
    # The whole transcript is one group element plus the two identities.
    switch = keypair_from_secret(TEST_GROUP, 3)
    contr = keypair_from_secret(TEST_GROUP, 4)
    Y, _ = initiate_with_ephemeral(switch, contr.public, SW, CTRL, 5)
    assert transcript_bytes(SW, CTRL, Y) == pack(SW, CTRL, Y)
    # The responder derives its context from exactly that transcript.
    ctx = homqv_respond(contr, switch.public, Y, SW, CTRL)
    assert ctx.ephemeral_Y == Y
