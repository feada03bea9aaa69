import pytest
from hypothesis import given, settings, strategies as st

from chainsdn.crypto import HybridCiphertext, PuzzleSolution, Signature
from chainsdn.encoding import (
    DecodeError,
    UnsupportedType,
    canonical_decode,
    canonical_encode,
    decode_uint,
    encode_uint,
    frame,
    pack,
)
from chainsdn.transactions import (
    TApp,
    TAppContr,
    TContr,
    TContrSwitch,
    TEvent,
    TFlow,
    TFlowAfore,
    TFlowAfter,
    TSwitch,
)

sig_st = st.builds(
    Signature,
    commitment=st.integers(min_value=0, max_value=2**256),
    response=st.integers(min_value=0, max_value=2**64),
)
hct_st = st.builds(
    HybridCiphertext,
    key_encapsulation=st.integers(min_value=1, max_value=2**128),
    payload=st.binary(max_size=64),
)
ids = st.text(min_size=0, max_size=12)
digests = st.binary(min_size=32, max_size=32)

tx_st = st.one_of(
    st.builds(TContr, ids, st.integers(1, 2**64), ids, sig_st),
    st.builds(TApp, ids, st.integers(1, 2**64), ids, ids, sig_st),
    st.builds(TAppContr, digests, digests),
    st.builds(TSwitch, ids, st.integers(1, 2**64), ids, ids, hct_st),
    st.builds(TContrSwitch, digests, digests),
    st.builds(TFlowAfore, ids, ids, st.integers(1, 2**64), st.binary(max_size=32), sig_st),
    st.builds(TFlowAfter, ids, ids, ids, st.binary(max_size=32)),
    st.builds(TFlow, digests, digests),
    st.builds(TEvent, ids, st.integers(1, 2**64), ids, ids, st.binary(max_size=32)),
)


def test_encode_deterministic():
    tx = TAppContr(b"\x01" * 32, b"\x02" * 32)
    assert canonical_encode(tx) == canonical_encode(tx)


def test_empty_bytes_field_is_zero_length_prefix():
    assert pack(b"") == b"\x00\x00\x00\x00"
    assert frame(b"") == b"\x00\x00\x00\x00"


def test_uint_widths():
    assert len(encode_uint(0)) == 8
    assert len(encode_uint(2**64 - 1)) == 8
    assert len(encode_uint(2**64)) == 9
    assert decode_uint(encode_uint(5)) == 5
    assert decode_uint(encode_uint(2**200 + 3)) == 2**200 + 3


def test_uint_rejects_negative_and_nonminimal():
    with pytest.raises(UnsupportedType):
        encode_uint(-1)
    with pytest.raises(DecodeError):
        decode_uint(b"\x00" * 9)  # 2**64-sized frame holding a small value


def test_unsupported_type():
    class Foreign:
        pass

    with pytest.raises(UnsupportedType):
        canonical_encode(Foreign())
    with pytest.raises(UnsupportedType):
        canonical_encode(3.14)


@settings(max_examples=300, deadline=None)
@given(tx_st, tx_st)
def test_injectivity(a, b):
    if canonical_encode(a) == canonical_encode(b):
        assert a == b


@settings(max_examples=200, deadline=None)
@given(tx_st)
def test_decode_round_trip(tx):
    assert canonical_decode(canonical_encode(tx)) == tx


def test_trailing_bytes_rejected():
    blob = canonical_encode(TAppContr(b"\x01" * 32, b"\x02" * 32))
    with pytest.raises(DecodeError):
        canonical_decode(blob + b"\x00")


def test_variant_tag_distinguishes_same_payload():
    a = TAppContr(b"\x01" * 32, b"\x02" * 32)
    b = TContrSwitch(b"\x01" * 32, b"\x02" * 32)
    c = TFlow(b"\x01" * 32, b"\x02" * 32)
    encodings = {canonical_encode(a), canonical_encode(b), canonical_encode(c)}
    assert len(encodings) == 3


def test_pack_nested_lists():
    assert pack(["ab", "c"]) != pack(["a", "bc"])
    assert pack((1, 2), 3) != pack((1,), (2, 3))


def test_puzzle_record_round_trip():
    sol = PuzzleSolution(b"switch-9", 12345, 16)
    assert canonical_decode(canonical_encode(sol)) == sol
