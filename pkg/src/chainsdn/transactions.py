"""The nine ledger transaction variants and the block record.

Transactions are content-addressed: a transaction's id is the hash of its
canonical encoding (which includes the variant tag), so identical submissions
are detectable and every reference between transactions is a 32-byte digest.

Three families:
  registration   TContr, TApp, TSwitch and the relationship records
                 TAppContr, TContrSwitch that tie them together
  flow           TFlowAfore (app -> controller, signed), TFlowAfter
                 (controller -> switch install report), TFlow aggregating the
                 two once both are committed
  events         TEvent, the dynamic switch-reported states
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .crypto import (
    DOMAIN_BLOCK,
    DOMAIN_TX,
    GroupParams,
    HybridCiphertext,
    Signature,
    ds_verify,
    sha256,
)
from .encoding import Reader, canonical_decode, canonical_encode, pack, register_record

GENESIS_PREV_HASH = bytes(32)


@dataclass(frozen=True)
class TContr:
    id_contr: str
    pk_contr: int
    slice: str
    sig: Signature


@dataclass(frozen=True)
class TApp:
    id_app: str
    pk_app: int
    category: str
    id_contr: str
    sig: Signature


@dataclass(frozen=True)
class TAppContr:
    id_t_app: bytes
    id_t_contr: bytes


@dataclass(frozen=True)
class TSwitch:
    id_switch: str
    pk_switch: int
    slice: str
    id_contr: str
    com: HybridCiphertext


@dataclass(frozen=True)
class TContrSwitch:
    id_t_contr: bytes
    id_t_switch: bytes


@dataclass(frozen=True)
class TFlowAfore:
    id_flow: str
    id_contr: str
    pk_app: int
    content: bytes
    sig_flow: Signature


@dataclass(frozen=True)
class TFlowAfter:
    id_flow: str
    id_contr: str
    id_switch: str
    state: bytes


@dataclass(frozen=True)
class TFlow:
    id_t_flow_afore: bytes
    id_t_flow_after: bytes


@dataclass(frozen=True)
class TEvent:
    id_event: str
    pk_switch: int
    id_contr: str
    id_switch: str
    event_payload: bytes


Transaction = Union[
    TContr, TApp, TAppContr, TSwitch, TContrSwitch, TFlowAfore, TFlowAfter, TFlow, TEvent
]

TX_TYPES = (TContr, TApp, TAppContr, TSwitch, TContrSwitch, TFlowAfore, TFlowAfter, TFlow, TEvent)


def txid(tx: Transaction) -> bytes:
    return sha256(DOMAIN_TX, canonical_encode(tx))


# Signature messages, matching what registrants actually sign.
def contr_message(id_contr: str, slice_name: str) -> bytes:
    return pack(id_contr, slice_name)


def app_message(id_app: str, category: str, id_contr: str) -> bytes:
    return pack(id_app, category, id_contr)


def flow_message(id_flow: str, id_contr: str, content: bytes) -> bytes:
    return pack(id_flow, id_contr, content)


def verify_embedded_signature(params: GroupParams, tx: Transaction) -> bool:
    """Check the self-contained signature of a signed variant.

    Unsigned variants verify vacuously; their integrity rests on content
    addressing and reference checks.
    """
    if isinstance(tx, TContr):
        return ds_verify(params, tx.pk_contr, contr_message(tx.id_contr, tx.slice), tx.sig)
    if isinstance(tx, TApp):
        return ds_verify(
            params, tx.pk_app, app_message(tx.id_app, tx.category, tx.id_contr), tx.sig
        )
    if isinstance(tx, TFlowAfore):
        return ds_verify(
            params, tx.pk_app, flow_message(tx.id_flow, tx.id_contr, tx.content), tx.sig_flow
        )
    return True


def referenced_ids(tx: Transaction) -> tuple[bytes, ...]:
    """Transaction ids this transaction points at (relationship variants)."""
    if isinstance(tx, TAppContr):
        return (tx.id_t_app, tx.id_t_contr)
    if isinstance(tx, TContrSwitch):
        return (tx.id_t_contr, tx.id_t_switch)
    if isinstance(tx, TFlow):
        return (tx.id_t_flow_afore, tx.id_t_flow_after)
    return ()


@dataclass(frozen=True)
class Block:
    height: int
    timestamp: int
    prev_hash: bytes
    tx_list: tuple
    block_hash: bytes


def compute_block_hash(height: int, timestamp: int, prev_hash: bytes, tx_list: tuple) -> bytes:
    return sha256(DOMAIN_BLOCK, pack(height, timestamp, prev_hash, tx_list))


def make_block(height: int, timestamp: int, prev_hash: bytes, tx_list: tuple) -> Block:
    return Block(
        height, timestamp, prev_hash, tx_list,
        compute_block_hash(height, timestamp, prev_hash, tx_list),
    )


def genesis_block() -> Block:
    return make_block(height=0, timestamp=0, prev_hash=GENESIS_PREV_HASH, tx_list=())


# Wire codecs ----------------------------------------------------------------

def _dec_tcontr(r: Reader) -> TContr:
    return TContr(r.read_str(), r.read_uint(), r.read_str(), r.read_record())


def _dec_tapp(r: Reader) -> TApp:
    return TApp(r.read_str(), r.read_uint(), r.read_str(), r.read_str(), r.read_record())


def _dec_tappcontr(r: Reader) -> TAppContr:
    return TAppContr(r.read_bytes(), r.read_bytes())


def _dec_tswitch(r: Reader) -> TSwitch:
    return TSwitch(r.read_str(), r.read_uint(), r.read_str(), r.read_str(), r.read_record())


def _dec_tcontrswitch(r: Reader) -> TContrSwitch:
    return TContrSwitch(r.read_bytes(), r.read_bytes())


def _dec_tflowafore(r: Reader) -> TFlowAfore:
    return TFlowAfore(r.read_str(), r.read_str(), r.read_uint(), r.read_bytes(), r.read_record())


def _dec_tflowafter(r: Reader) -> TFlowAfter:
    return TFlowAfter(r.read_str(), r.read_str(), r.read_str(), r.read_bytes())


def _dec_tflow(r: Reader) -> TFlow:
    return TFlow(r.read_bytes(), r.read_bytes())


def _dec_tevent(r: Reader) -> TEvent:
    return TEvent(r.read_str(), r.read_uint(), r.read_str(), r.read_str(), r.read_bytes())


def _dec_block(r: Reader) -> Block:
    height = r.read_uint()
    timestamp = r.read_uint()
    prev_hash = r.read_bytes()
    txs = []
    inner = Reader(r.read_frame())
    while not inner.exhausted():
        txs.append(canonical_decode(inner.read_frame()))
    return Block(height, timestamp, prev_hash, tuple(txs), r.read_bytes())


register_record(TContr, 1, decoder=_dec_tcontr)
register_record(TApp, 2, decoder=_dec_tapp)
register_record(TAppContr, 3, decoder=_dec_tappcontr)
register_record(TSwitch, 4, decoder=_dec_tswitch)
register_record(TContrSwitch, 5, decoder=_dec_tcontrswitch)
register_record(TFlowAfore, 6, decoder=_dec_tflowafore)
register_record(TFlowAfter, 7, decoder=_dec_tflowafter)
register_record(TFlow, 8, decoder=_dec_tflow)
register_record(TEvent, 9, decoder=_dec_tevent)
register_record(Block, 10, decoder=_dec_block)
