"""Canonical byte encoding for every record the ledger touches.

Signatures and block hashes must be bit-exact across runs, so there is one
encoding and it is injective: fields are written in declared order, each one
framed with a 4-byte big-endian length, and every registered record type is
prefixed with a 1-byte tag so two records of different types can never encode
to the same bytes.

Integers below 2**64 are written as fixed 8-byte big-endian; larger integers
(group elements, scalars) as their minimal big-endian form, which is at least
9 bytes and therefore never collides with the fixed-width form.
"""

from __future__ import annotations

import dataclasses
from typing import Any, Callable


class UnsupportedType(Exception):
    """Raised when a value is not one of the declared domain types."""


class DecodeError(Exception):
    """Raised when a byte string is not a valid canonical encoding."""


_U64_MAX = 2**64 - 1


def encode_uint(n: int) -> bytes:
    """Unsigned integer payload: 8-byte big-endian if it fits, minimal otherwise."""
    if not isinstance(n, int) or isinstance(n, bool):
        raise UnsupportedType(f"not an int: {n!r}")
    if n < 0:
        raise UnsupportedType(f"negative integer: {n}")
    if n <= _U64_MAX:
        return n.to_bytes(8, "big")
    return n.to_bytes((n.bit_length() + 7) // 8, "big")


def decode_uint(payload: bytes) -> int:
    if len(payload) < 8:
        raise DecodeError("integer payload shorter than 8 bytes")
    n = int.from_bytes(payload, "big")
    # Re-encoding must reproduce the payload, otherwise the form was not minimal.
    if encode_uint(n) != payload:
        raise DecodeError("non-canonical integer payload")
    return n


def frame(payload: bytes) -> bytes:
    """4-byte big-endian length prefix followed by the payload."""
    if len(payload) > 0xFFFFFFFF:
        raise UnsupportedType("payload exceeds 4-byte length prefix")
    return len(payload).to_bytes(4, "big") + payload


def _value_payload(value: Any) -> bytes:
    if isinstance(value, bool):
        raise UnsupportedType("bool fields are not part of the wire vocabulary")
    if isinstance(value, bytes):
        return value
    if isinstance(value, str):
        return value.encode("utf-8")
    if isinstance(value, int):
        return encode_uint(value)
    if isinstance(value, (list, tuple)):
        return b"".join(frame(_value_payload(v)) for v in value)
    if isinstance(value, (set, frozenset)):
        items = sorted(value)
        return b"".join(frame(_value_payload(v)) for v in items)
    if type(value) in _BY_TYPE:
        return canonical_encode(value)
    raise UnsupportedType(f"cannot encode {type(value).__name__}")


def pack(*values: Any) -> bytes:
    """Frame and concatenate a fixed sequence of values.

    This is the layout used for signature messages and hash preimages built
    from loose fields rather than whole records.
    """
    return b"".join(frame(_value_payload(v)) for v in values)


# Registry of record types: tag byte -> (class, encoder, decoder).
_BY_TAG: dict[int, tuple[type, Callable[[Any], bytes], Callable[["Reader"], Any]]] = {}
_BY_TYPE: dict[type, int] = {}


def register_record(cls: type, tag: int, encoder=None, decoder=None) -> None:
    """Register a dataclass for canonical encoding under a 1-byte tag.

    Without an explicit encoder the fields are packed in declaration order.
    A decoder is optional; records that never cross a storage boundary
    (in-memory ABE material) register encode-only.
    """
    if not 0 <= tag <= 0xFF:
        raise ValueError("tag must fit one byte")
    if tag in _BY_TAG or cls in _BY_TYPE:
        raise ValueError(f"duplicate registration for tag {tag} / {cls.__name__}")
    if encoder is None:
        names = [f.name for f in dataclasses.fields(cls)]

        def encoder(value, _names=names):
            return pack(*(getattr(value, n) for n in _names))

    _BY_TAG[tag] = (cls, encoder, decoder)
    _BY_TYPE[cls] = tag


def canonical_encode(value: Any) -> bytes:
    """Encode a registered domain record: 1-byte tag, then framed fields."""
    tag = _BY_TYPE.get(type(value))
    if tag is None:
        raise UnsupportedType(f"{type(value).__name__} is not a registered record type")
    _, encoder, _ = _BY_TAG[tag]
    return bytes([tag]) + encoder(value)


class Reader:
    """Sequential reader over canonical bytes."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def exhausted(self) -> bool:
        return self._pos == len(self._data)

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise DecodeError("truncated input")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def read_frame(self) -> bytes:
        length = int.from_bytes(self.take(4), "big")
        return self.take(length)

    def read_bytes(self) -> bytes:
        return self.read_frame()

    def read_str(self) -> str:
        try:
            return self.read_frame().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError("invalid utf-8 in string field") from exc

    def read_uint(self) -> int:
        return decode_uint(self.read_frame())

    def read_record(self):
        """Decode a framed nested record field."""
        return canonical_decode(self.read_frame())


def canonical_decode_from(reader: Reader) -> Any:
    tag = reader.take(1)[0]
    entry = _BY_TAG.get(tag)
    if entry is None:
        raise DecodeError(f"unknown record tag {tag}")
    cls, _, decoder = entry
    if decoder is None:
        raise DecodeError(f"{cls.__name__} has no registered decoder")
    return decoder(reader)


def canonical_decode(data: bytes) -> Any:
    """Decode one record and require the input to be fully consumed."""
    reader = Reader(data)
    value = canonical_decode_from(reader)
    if not reader.exhausted():
        raise DecodeError("trailing bytes after record")
    return value
