"""The security protocols that run against the ledger and its audit index.

Request-path handlers (flow authentication, connection auditing, resource
access) and commit hooks (arbitration-loss and controller-failure
notification) are pure functions of the chain snapshot, the index, and the
request, returning verdicts plus any transactions to submit. The shared
reputation book is the one explicit piece of mutable state and only ever
moves down.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .abe import (
    AbeCiphertext,
    AbeKey,
    AbeParams,
    AttributeSet,
    Gate,
    GateKind,
    Leaf,
    abe_encrypt,
    abe_keygen,
)
from .crypto import (
    DecryptReject,
    Drbg,
    GroupParams,
    KeyPair,
    Signature,
    ae_decrypt,
    ds_verify,
    sha256,
)
from .encoding import DecodeError, Reader, canonical_decode, frame, pack, register_record
from .homqv import SessionContext, homqv_respond
from .ledger import Ledger
from .transactions import (
    HybridCiphertext,
    TApp,
    TContr,
    TContrSwitch,
    TFlow,
    TFlowAfore,
    TFlowAfter,
    TSwitch,
    flow_message,
    txid,
)
from .txgraph import AuditIndex

INITIAL_REPUTATION = 100
REPUTATION_PENALTY = 10
FAILURE_WINDOW = 6
CONFLICT_PREFIX_LEN = 16
_ARB = b"ARB"


class UnknownEntity(Exception):
    pass


class UnknownApp(Exception):
    pass


class UnknownResource(Exception):
    pass


class NotFound(Exception):
    pass


# -- reputation ---------------------------------------------------------------

@dataclass
class ReputationBook:
    score_by_entity: dict = field(default_factory=dict)
    ban_threshold: int = 0
    initial: int = INITIAL_REPUTATION
    penalty: int = REPUTATION_PENALTY

    def register(self, entity_id: str) -> None:
        self.score_by_entity.setdefault(entity_id, self.initial)

    def score(self, entity_id: str) -> int:
        return self.score_by_entity.get(entity_id, self.initial)

    def is_banned(self, entity_id: str) -> bool:
        return (
            entity_id in self.score_by_entity
            and self.score_by_entity[entity_id] <= self.ban_threshold
        )


def reduce_reputation(entity_id: str, book: ReputationBook) -> ReputationBook:
    """Knock the entity's score down one penalty step, flooring at zero."""
    if entity_id not in book.score_by_entity:
        raise UnknownEntity(entity_id)
    book.score_by_entity[entity_id] = max(0, book.score_by_entity[entity_id] - book.penalty)
    return book


# -- notifications ------------------------------------------------------------

class NotificationKind(enum.Enum):
    ARBITRATION_LOSS = "arbitration_loss"
    CONTROLLER_FAILED = "controller_failed"


@dataclass(frozen=True)
class Notification:
    recipient: str
    kind: NotificationKind
    subject: str  # losing flow id, or failed controller id
    issued_at: int  # block height


# -- flow records and authentication (request path) ---------------------------

@dataclass(frozen=True)
class Flow:
    """An application flow as it travels from app to controller."""

    id_flow: str
    content: bytes
    pk_app: int
    id_contr: str
    id_switch: str
    sig: Signature


class FlowReason(enum.Enum):
    ACCEPTED = "accepted"
    BANNED = "banned"
    REPLAYED_FLOW = "replayed_flow"
    UNREGISTERED_APP = "unregistered_app"
    BAD_FLOW_SIGNATURE = "bad_flow_signature"


@dataclass(frozen=True)
class FlowVerdict:
    accepted: bool
    reason: FlowReason
    afore: TFlowAfore | None = None


def _app_id_for_pk(pk_app: int, index: AuditIndex) -> str | None:
    id_t_app = index.by_pk_app.get(pk_app)
    if id_t_app is None:
        return None
    return index.tx_by_id[id_t_app].id_app


def flow_replay_detect(flow: Flow, index: AuditIndex, reputation: ReputationBook) -> bool:
    """True when the flow id is fresh; a replay also costs the app reputation."""
    if not index.flow_seen(flow.id_flow):
        return True
    app_id = _app_id_for_pk(flow.pk_app, index)
    if app_id is not None and app_id in reputation.score_by_entity:
        reduce_reputation(app_id, reputation)
    return False


def auth_flow(
    flow: Flow,
    index: AuditIndex,
    reputation: ReputationBook,
    params: GroupParams,
) -> FlowVerdict:
    """Admit or reject one application flow.

    Order matters: the deny list first, then replay detection, then the
    registration walk, and only then the signature.
    """
    app_id = _app_id_for_pk(flow.pk_app, index)
    if app_id is not None and reputation.is_banned(app_id):
        return FlowVerdict(False, FlowReason.BANNED)
    if not flow_replay_detect(flow, index, reputation):
        return FlowVerdict(False, FlowReason.REPLAYED_FLOW)
    if not index.flow_auth_path(flow.pk_app, flow.id_contr, flow.id_switch):
        return FlowVerdict(False, FlowReason.UNREGISTERED_APP)
    msg = flow_message(flow.id_flow, flow.id_contr, flow.content)
    if not ds_verify(params, flow.pk_app, msg, flow.sig):
        return FlowVerdict(False, FlowReason.BAD_FLOW_SIGNATURE)
    afore = TFlowAfore(flow.id_flow, flow.id_contr, flow.pk_app, flow.content, flow.sig)
    return FlowVerdict(True, FlowReason.ACCEPTED, afore)


# -- arbitration-loss notification (commit hook) -------------------------------

def conflict_key(content: bytes) -> bytes:
    """Match-field digest: flows with equal digests compete for the same slot."""
    return sha256(_ARB, frame(content[:CONFLICT_PREFIX_LEN]))


def arbitration_loss_notify(block, index: AuditIndex) -> list:
    """Losers of flow arbitration, discovered at commit time.

    A winner is an installed flow (it has a TFlowAfter); a loser is a
    committed flow with the same conflict key, different content, and no
    install record. A pair is reported when either side lands in this block.
    """
    afores = {index.tx_by_id[i].id_flow: index.tx_by_id[i] for i in index.flow_afore_by_flow.values()}

    def afore_of(id_flow):
        return afores.get(id_flow)

    winners = []
    for id_flow in index.flow_after_by_flow:
        w = afore_of(id_flow)
        if w is not None:
            winners.append(w)

    block_after_ids = {tx.id_flow for tx in block.tx_list if isinstance(tx, TFlowAfter)}
    block_afore_ids = {tx.id_flow for tx in block.tx_list if isinstance(tx, TFlowAfore)}

    notifications = []
    seen = set()
    for winner in winners:
        wkey = conflict_key(winner.content)
        for loser in afores.values():
            if loser.id_flow == winner.id_flow:
                continue
            if loser.id_flow in index.flow_after_by_flow:
                continue  # installed somewhere itself, not a loser
            if conflict_key(loser.content) != wkey or loser.content == winner.content:
                continue
            if winner.id_flow not in block_after_ids and loser.id_flow not in block_afore_ids:
                continue  # neither side is news in this block
            app_id = _app_id_for_pk(loser.pk_app, index)
            if app_id is None:
                continue
            dedupe = (app_id, loser.id_flow)
            if dedupe in seen:
                continue
            seen.add(dedupe)
            notifications.append(
                Notification(
                    recipient=app_id,
                    kind=NotificationKind.ARBITRATION_LOSS,
                    subject=loser.id_flow,
                    issued_at=block.height,
                )
            )
    return notifications


# -- controller-failure notification (commit hook) -----------------------------

def controller_failed_notify(index: AuditIndex, window: int = FAILURE_WINDOW) -> list:
    """Notify the switches of every controller that just went quiet."""
    notifications = []
    for id_contr in index.newly_inactive_controllers(window):
        for id_switch in index.switches_of_controller(id_contr):
            notifications.append(
                Notification(
                    recipient=id_switch,
                    kind=NotificationKind.CONTROLLER_FAILED,
                    subject=id_contr,
                    issued_at=index.height_indexed,
                )
            )
    return notifications


# -- attribute-based access control (request path) -----------------------------

def app_attribute_set(id_app: str, index: AuditIndex) -> AttributeSet:
    """On-chain facts about an app: its id, its category, its controllers."""
    id_t_app = index.app_by_id.get(id_app)
    if id_t_app is None:
        raise UnknownApp(id_app)
    tapp = index.tx_by_id[id_t_app]
    contrs = []
    for (ta, tc) in index.app_contr_edges:
        if ta == id_t_app:
            contr_tx = index.tx_by_id.get(tc)
            if isinstance(contr_tx, TContr):
                contrs.append(contr_tx.id_contr)
    return AttributeSet([id_app, tapp.category, *contrs])


def app_policy(id_app: str, index: AuditIndex) -> Gate:
    """Access tree minted for an app: id AND category AND (one of its controllers)."""
    attrs = app_attribute_set(id_app, index)
    tapp = index.tx_by_id[index.app_by_id[id_app]]
    contrs = sorted(set(attrs.attributes) - {id_app, tapp.category})
    children = [Leaf(id_app), Leaf(tapp.category)]
    if len(contrs) == 1:
        children.append(Leaf(contrs[0]))
    elif contrs:
        children.append(Gate(GateKind.OR, tuple(Leaf(c) for c in contrs)))
    return Gate(GateKind.AND, tuple(children))


def managing_controllers(slice_name: str, index: AuditIndex) -> list:
    """Controllers tied to a slice: declared home slice or a linked switch there."""
    out = set()
    for id_contr, id_t in index.by_id_contr.items():
        if index.tx_by_id[id_t].slice == slice_name:
            out.add(id_contr)
    for tx_ids in index.switch_tx_ids.values():
        for id_t in tx_ids:
            tx = index.tx_by_id[id_t]
            if tx.slice == slice_name and tx.id_contr in index.by_id_contr:
                out.add(tx.id_contr)
    return sorted(out)


def resource_labels(slice_name: str, index: AuditIndex) -> frozenset:
    """Slice-derived labels: managing controllers plus their apps and categories."""
    labels = set()
    contr_txids = set()
    for id_contr in managing_controllers(slice_name, index):
        labels.add(id_contr)
        contr_txids.add(index.by_id_contr[id_contr])
    for (ta, tc) in index.app_contr_edges:
        if tc in contr_txids:
            tapp = index.tx_by_id.get(ta)
            if isinstance(tapp, TApp):
                labels.add(tapp.id_app)
                labels.add(tapp.category)
    return frozenset(labels)


@dataclass
class ResourceStore:
    """Controller-held network-wide resources, served only in encrypted form."""

    abe_params: AbeParams
    rng: Drbg
    resources: dict = field(default_factory=dict)  # resource id -> (slice, plaintext)
    _ciphertexts: dict = field(default_factory=dict)  # (resource id, labels) -> ct
    _keys: dict = field(default_factory=dict)  # app id -> AbeKey

    def add_resource(self, resource_id: str, slice_name: str, plaintext: bytes) -> None:
        self.resources[resource_id] = (slice_name, plaintext)

    def ciphertext_for(self, resource_id: str, index: AuditIndex) -> AbeCiphertext:
        if resource_id not in self.resources:
            raise UnknownResource(resource_id)
        slice_name, plaintext = self.resources[resource_id]
        labels = resource_labels(slice_name, index)
        cache_key = (resource_id, labels)
        if cache_key not in self._ciphertexts:
            self._ciphertexts[cache_key] = abe_encrypt(
                plaintext, AttributeSet(labels), self.abe_params, self.rng
            )
        return self._ciphertexts[cache_key]

    def key_for(self, id_app: str, index: AuditIndex) -> tuple[AbeKey, bool]:
        """The app's decryption key, minting it on first contact."""
        if id_app in self._keys:
            return self._keys[id_app], False
        policy = app_policy(id_app, index)
        key = abe_keygen(policy, self.abe_params, self.rng.take(32))
        self._keys[id_app] = key
        return key, True


def access_control_serve(
    requesting_app: str,
    resource: str,
    store: ResourceStore,
    index: AuditIndex,
) -> tuple[AbeCiphertext, AbeKey | None]:
    """Serve one encrypted resource; mints the app's key on first contact.

    Raises UnknownApp / UnknownResource. Whether the app can actually read the
    plaintext is decided by the attribute algebra, not by this handler.
    """
    if index.app_by_id.get(requesting_app) is None:
        raise UnknownApp(requesting_app)
    ciphertext = store.ciphertext_for(resource, index)
    key, minted = store.key_for(requesting_app, index)
    return ciphertext, (key if minted else None)


# -- connection auditing and the key-update challenge --------------------------

@dataclass(frozen=True)
class ComPayload:
    """What a commitment decrypts to: the chosen nonce plus a signature on it."""

    nonce: bytes
    sig: Signature


def com_message(nonce: bytes) -> bytes:
    return pack(nonce)


@dataclass(frozen=True)
class ConnectionRequest:
    pk_switch: int
    com: HybridCiphertext
    ephemeral_Y: int
    slice: str
    id_contr: str
    prior_request_id: bytes | None = None  # present only on the key-update path

    def param_count(self) -> int:
        return 3 if self.prior_request_id is not None else 2


class ConnReason(enum.Enum):
    SESSION_ESTABLISHED = "session_established"
    BANNED = "banned"
    BAD_PUZZLE = "bad_puzzle"
    REPLAYED_REQUEST = "replayed_request"
    CHALLENGE_FAILED = "challenge_failed"


@dataclass(frozen=True)
class ConnVerdict:
    accepted: bool
    reason: ConnReason
    session: SessionContext | None = None
    txs_to_submit: tuple = ()  # (TSwitch, TContrSwitch) on a fresh connection


def _open_com(controller_keys: KeyPair, com: HybridCiphertext) -> ComPayload | None:
    try:
        payload = canonical_decode(ae_decrypt(controller_keys, com))
    except (DecryptReject, DecodeError):
        return None
    return payload if isinstance(payload, ComPayload) else None


def switch_challenge(
    claimed_switch: str,
    req: ConnectionRequest,
    controller_keys: KeyPair,
    index: AuditIndex,
) -> bool:
    """Key-update identity check against the logged commitment.

    True only when the new commitment is fresh ciphertext, repeats the nonce
    from the switch's registered commitment, and both embedded signatures
    verify under the previously registered public key. Never raises.
    """
    if req.prior_request_id is None:
        return False
    prior = index.tx_by_id.get(req.prior_request_id)
    if not isinstance(prior, TSwitch) or prior.id_switch != claimed_switch:
        return False
    if req.com == prior.com:
        return False  # a verbatim replay of the stored commitment proves nothing
    old = _open_com(controller_keys, prior.com)
    new = _open_com(controller_keys, req.com)
    if old is None or new is None:
        return False
    if new.nonce != old.nonce:
        return False
    params = controller_keys.params
    registered_pk = prior.pk_switch
    return ds_verify(params, registered_pk, com_message(old.nonce), old.sig) and ds_verify(
        params, registered_pk, com_message(new.nonce), new.sig
    )


def audit_authen_request(
    claimed_switch: str,
    req: ConnectionRequest,
    controller_keys: KeyPair,
    controller_id: str,
    index: AuditIndex,
    reputation: ReputationBook,
    admitted_switches: dict,
) -> ConnVerdict:
    """Handle one connection request from a switch.

    Two parameters (pk, commitment) is a fresh connection: reject exact
    repeats of an already-committed (pk, commitment) pair, otherwise register
    the switch and answer the key exchange. Three parameters is the key-update
    path, gated on the challenge.

    admitted_switches maps switch id -> public key recorded when the switch's
    anti-spoofing puzzle was verified; unknown ids and fresh-path key
    mismatches are treated as spoofing.
    """
    if reputation.is_banned(claimed_switch):
        return ConnVerdict(False, ConnReason.BANNED)
    admitted_pk = admitted_switches.get(claimed_switch)
    if admitted_pk is None:
        return ConnVerdict(False, ConnReason.BAD_PUZZLE)

    if req.param_count() == 2:
        if admitted_pk != req.pk_switch:
            # A new key without the challenge path is an identity grab.
            return ConnVerdict(False, ConnReason.BAD_PUZZLE)
        request_key = (req.pk_switch, req.com.key_encapsulation, req.com.payload)
        if request_key in index.tswitch_request_keys:
            if claimed_switch in reputation.score_by_entity:
                reduce_reputation(claimed_switch, reputation)
            return ConnVerdict(False, ConnReason.REPLAYED_REQUEST)
        tswitch = TSwitch(claimed_switch, req.pk_switch, req.slice, controller_id, req.com)
        txs = []
        id_t_contr = index.by_id_contr.get(controller_id)
        txs.append(tswitch)
        if id_t_contr is not None:
            txs.append(TContrSwitch(id_t_contr, txid(tswitch)))
        session = homqv_respond(
            controller_keys,
            req.pk_switch,
            req.ephemeral_Y,
            claimed_switch.encode("utf-8"),
            controller_id.encode("utf-8"),
        )
        return ConnVerdict(True, ConnReason.SESSION_ESTABLISHED, session, tuple(txs))

    if not switch_challenge(claimed_switch, req, controller_keys, index):
        return ConnVerdict(False, ConnReason.CHALLENGE_FAILED)
    session = homqv_respond(
        controller_keys,
        req.pk_switch,
        req.ephemeral_Y,
        claimed_switch.encode("utf-8"),
        controller_id.encode("utf-8"),
    )
    return ConnVerdict(True, ConnReason.SESSION_ESTABLISHED, session)


# -- provenance trails ----------------------------------------------------------

@dataclass(frozen=True)
class TrailStep:
    height: int
    kind: str
    id_tx: bytes
    tx: object


def event_payload_for_flow(id_flow: str, detail: bytes) -> bytes:
    """Event payload layout that lets audits link events back to their flow."""
    return pack(id_flow, detail)


def flow_ref_from_event_payload(payload: bytes) -> str | None:
    if len(payload) < 4:
        return None
    length = int.from_bytes(payload[:4], "big")
    if len(payload) < 4 + length:
        return None
    try:
        return payload[4 : 4 + length].decode("utf-8")
    except UnicodeDecodeError:
        return None


def audit_network(query: str, index: AuditIndex) -> list:
    """Ordered provenance trail for a flow id or an event id."""
    id_flow = query
    anchor_event = None
    if query not in index.flow_afore_by_flow:
        event_txid = index.event_tx_by_id.get(query)
        if event_txid is None:
            raise NotFound(query)
        anchor_event = index.tx_by_id[event_txid]
        ref = flow_ref_from_event_payload(anchor_event.event_payload)
        if ref is None or ref not in index.flow_afore_by_flow:
            return [TrailStep(index.height_by_id[event_txid], "t_event", event_txid, anchor_event)]
        id_flow = ref

    steps = []
    afore_id = index.flow_afore_by_flow[id_flow]
    afore = index.tx_by_id[afore_id]
    t_app_id = index.by_pk_app.get(afore.pk_app)
    if t_app_id is not None:
        steps.append(TrailStep(index.height_by_id[t_app_id], "t_app", t_app_id, index.tx_by_id[t_app_id]))
    steps.append(TrailStep(index.height_by_id[afore_id], "t_flow_afore", afore_id, afore))
    after_id = index.flow_after_by_flow.get(id_flow)
    if after_id is not None:
        steps.append(
            TrailStep(index.height_by_id[after_id], "t_flow_after", after_id, index.tx_by_id[after_id])
        )
    event_steps = []
    for id_event, event_txid in index.event_tx_by_id.items():
        tx = index.tx_by_id[event_txid]
        if flow_ref_from_event_payload(tx.event_payload) == id_flow:
            event_steps.append(TrailStep(index.height_by_id[event_txid], "t_event", event_txid, tx))
    event_steps.sort(key=lambda s: (s.height, s.id_tx))
    steps.extend(event_steps)
    return steps


# -- ledger aggregation hook -----------------------------------------------------

def flow_aggregation_hook(ledger: Ledger, block) -> list:
    """Emit a TFlow aggregate once both halves of a flow are on-chain."""
    index = AuditIndex()
    index.index_chain(ledger.chain)
    out = []
    for tx in block.tx_list:
        if isinstance(tx, (TFlowAfore, TFlowAfter)):
            afore_id = index.flow_afore_by_flow.get(tx.id_flow)
            after_id = index.flow_after_by_flow.get(tx.id_flow)
            agg = TFlow(afore_id, after_id) if afore_id and after_id else None
            if agg is not None and agg not in out:
                out.append(agg)
    return out


def _dec_com_payload(r: Reader) -> ComPayload:
    return ComPayload(nonce=r.read_bytes(), sig=r.read_record())


register_record(ComPayload, 19, decoder=_dec_com_payload)
