"""Discrete-event simulation of the ledger-backed control plane.

Apps, controllers, and switches are state machines exchanging messages over a
deterministic bus: one tick delivers due messages, runs the protocol handlers,
executes one consensus round, fires commit hooks, and appends report rows.
Everything is derived from (scenario, seed), so two runs produce identical
reports and identical chains.

Adversary injectors enqueue labeled malicious actions; the report accounts for
every label so detection rates are computable. Event payloads recorded
on-chain are plaintext by design: transport is session-encrypted, the ledger
record is not.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .abe import abe_decrypt, abe_setup, PolicyUnsatisfied
from .crypto import (
    Drbg,
    GroupParams,
    KeyPair,
    PuzzleSolution,
    SIM_GROUP,
    Signature,
    TEST_GROUP,
    ae_encrypt,
    ds_keygen,
    ds_sign,
    sha256,
    solve_puzzle,
    verify_puzzle,
)
from .encoding import canonical_encode, pack
from .homqv import homqv_initiate
from .ledger import Behavior, Ledger, ValidatorSet
from .protocols import (
    ComPayload,
    ConnectionRequest,
    Flow,
    NotificationKind,
    ReputationBook,
    ResourceStore,
    TFlow,
    access_control_serve,
    arbitration_loss_notify,
    audit_authen_request,
    auth_flow,
    com_message,
    conflict_key,
    controller_failed_notify,
    event_payload_for_flow,
    UnknownApp,
    UnknownResource,
)
from .transactions import (
    TApp,
    TAppContr,
    TContr,
    TFlowAfore,
    TFlowAfter,
    TEvent,
    app_message,
    contr_message,
    flow_message,
    txid,
)
from .txgraph import AuditIndex

CATEGORIES = (
    "traffic engineering",
    "mobility and wireless",
    "measurement and monitoring",
    "security and dependability",
    "data center networking",
)


class DuplicateId(Exception):
    pass


class BadPuzzle(Exception):
    pass


class UnknownTarget(Exception):
    pass


class EntityKind(enum.Enum):
    APP = "app"
    CONTROLLER = "controller"
    SWITCH = "switch"


@dataclass
class EntityRecord:
    kind: EntityKind
    id: str
    keys: KeyPair
    slice: str = ""
    category: str = ""
    contr: str = ""  # an app's registered controller
    puzzle: PuzzleSolution | None = None


# -- message payloads ----------------------------------------------------------

@dataclass(frozen=True)
class FlowSubmission:
    flow: Flow


@dataclass(frozen=True)
class ConnRequestMsg:
    request: ConnectionRequest


@dataclass(frozen=True)
class PacketIn:
    digest: bytes


@dataclass(frozen=True)
class InstallFlow:
    id_flow: str
    content: bytes


@dataclass(frozen=True)
class InstallAck:
    id_flow: str
    state: bytes


@dataclass(frozen=True)
class EventReport:
    id_event: str
    payload: bytes


@dataclass(frozen=True)
class NotificationMsg:
    kind: NotificationKind
    subject: str


@dataclass(frozen=True)
class ResourceRequest:
    resource_id: str


@dataclass
class SimMessage:
    tick: int
    from_id: str
    to_id: str
    payload: object
    seq: int
    attack_index: int | None = None  # set on labeled malicious messages


class AdversaryKind(enum.Enum):
    FORGED_FLOW = "forged_flow"
    REPLAY_FLOW = "replay_flow"
    REPLAY_CONNECTION = "replay_connection"
    SPOOF_SWITCH = "spoof_switch"
    TAMPER_FLOW_CONTENT = "tamper_flow_content"
    CRASH_CONTROLLER = "crash_controller"
    BYZANTINE_VALIDATOR = "byzantine_validator"


@dataclass(frozen=True)
class AdversaryConfig:
    kind: AdversaryKind
    target: str
    schedule: tuple


@dataclass
class AttackRecord:
    kind: AdversaryKind
    target: str
    tick: int
    executed: bool = False
    detected: bool | None = None
    detail: str = ""


@dataclass
class SimConfig:
    seed: int = 0
    window: int = 6
    difficulty: int = 16
    validators: int = 4
    byzantine: int = 0
    tier: str = "sim"  # "test" or "sim"

    def group(self) -> GroupParams:
        return TEST_GROUP if self.tier == "test" else SIM_GROUP

    def behaviors(self) -> list:
        if self.byzantine > (self.validators - 1) // 3:
            raise ValueError("byzantine count exceeds (n-1)/3")
        out = [Behavior.HONEST] * self.validators
        for i in range(self.byzantine):
            out[i] = Behavior.EQUIVOCATING if i % 2 == 0 else Behavior.SILENT
        return out


@dataclass
class SessionState:
    switch_id: str
    contr_id: str
    nonce: bytes
    com: object
    tswitch_id: bytes | None
    switch_key: bytes | None
    contr_key: bytes | None


class World:
    """Owns the ledger, the entities, the bus, and the report."""

    def __init__(self, config: SimConfig, universe_hint: tuple = ()):
        self.config = config
        self.params = config.group()
        self.rng = Drbg(pack(config.seed), b"world")
        self.ledger = Ledger(self.params, ValidatorSet(config.behaviors()))
        self.index = AuditIndex()
        self.index.index_chain(self.ledger.chain)
        self.reputation = ReputationBook()
        universe = sorted(set(universe_hint) | set(CATEGORIES))
        self.store = ResourceStore(
            abe_params=abe_setup(
                16 if config.tier == "test" else 128,
                universe,
                sha256(pack(config.seed), b"abe"),
                group=self.params,
            ),
            rng=Drbg(pack(config.seed), b"store"),
        )
        self.entities: dict[str, EntityRecord] = {}
        self.registration_txid: dict[str, bytes] = {}
        self.admitted_switches: dict[str, int] = {}
        self.sessions: dict[tuple, SessionState] = {}
        self.installed: dict[str, dict] = {}  # switch -> conflict key -> (id_flow, content)
        self.pending_installs: dict[tuple, list] = {}  # (contr, switch) -> [(id_flow, content)]
        self.crashed: set[str] = set()
        self.queue: list[SimMessage] = []
        self._seq = 0
        self.tick = -1
        self.flow_log: list[Flow] = []
        self.conn_log: list[tuple] = []  # (switch_id, ConnectionRequest)
        self.attacks: list[AttackRecord] = []
        self.adversaries: list[AdversaryConfig] = []
        self.notifications: list = []
        self.report_rows: list[str] = []
        self.verdict_counts: dict[str, int] = {}
        self.app_abe_keys: dict[str, object] = {}
        self._id_counters: dict[str, int] = {}
        self._committed_hashes: list[bytes] = [b.block_hash for b in self.ledger.chain]
        self.safety_violations = 0
        self.ledger.register_commit_hook(self._on_commit)

    # -- plumbing ------------------------------------------------------------

    def log(self, text: str) -> None:
        self.report_rows.append(f"[t={self.tick}] {text}")

    def _count(self, key: str) -> None:
        self.verdict_counts[key] = self.verdict_counts.get(key, 0) + 1

    def send(self, from_id: str, to_id: str, payload, attack_index=None, delay: int = 1) -> None:
        self.queue.append(
            SimMessage(self.tick + delay, from_id, to_id, payload, self._seq, attack_index)
        )
        self._seq += 1

    def next_id(self, prefix: str) -> str:
        n = self._id_counters.get(prefix, 0)
        self._id_counters[prefix] = n + 1
        return f"{prefix}{n}"

    def _entity_seed(self, entity_id: str) -> bytes:
        return sha256(pack(self.config.seed, entity_id), b"entity")

    # -- spawning ------------------------------------------------------------

    def spawn_entity(self, kind: EntityKind, entity_id: str, slice_name: str = "",
                     category: str = "", contr_id: str = "",
                     puzzle: PuzzleSolution | None = None) -> EntityRecord:
        if entity_id in self.entities:
            raise DuplicateId(entity_id)
        keys = ds_keygen(self.params, self._entity_seed(entity_id))
        record = EntityRecord(kind, entity_id, keys, slice_name, category, contr_id)
        if kind is EntityKind.CONTROLLER:
            tx = TContr(
                entity_id, keys.public, slice_name,
                ds_sign(keys, contr_message(entity_id, slice_name)),
            )
            self.registration_txid[entity_id] = txid(tx)
            self._submit(tx, f"spawn controller {entity_id}")
        elif kind is EntityKind.APP:
            if category not in CATEGORIES:
                raise ValueError(f"unknown category {category!r}")
            tx = TApp(
                entity_id, keys.public, category, contr_id,
                ds_sign(keys, app_message(entity_id, category, contr_id)),
            )
            self.registration_txid[entity_id] = txid(tx)
            self._submit(tx, f"spawn app {entity_id}")
            contr_txid = self.registration_txid.get(contr_id)
            if contr_txid is None:
                raise UnknownTarget(f"app {entity_id} names unregistered controller {contr_id}")
            self._submit(TAppContr(txid(tx), contr_txid), f"link {entity_id}->{contr_id}")
        else:
            if puzzle is None:
                puzzle = solve_puzzle(entity_id.encode("utf-8"), self.config.difficulty)
            if (
                puzzle.subject_id != entity_id.encode("utf-8")
                or puzzle.difficulty < self.config.difficulty
                or not verify_puzzle(puzzle)
            ):
                raise BadPuzzle(entity_id)
            record.puzzle = puzzle
            self.admitted_switches[entity_id] = keys.public
            self.log(f"spawn switch {entity_id} puzzle_nonce={puzzle.nonce} -> admitted")
        self.reputation.register(entity_id)
        self.entities[entity_id] = record
        return record

    def _submit(self, tx, what: str) -> None:
        admission = self.ledger.submit_tx(tx)
        status = "admitted" if admission.admitted else f"rejected:{admission.reason.value}"
        self.log(f"{what} -> {status}")

    def add_resource(self, resource_id: str, slice_name: str) -> None:
        payload = sha256(pack("topology", slice_name))
        self.store.add_resource(resource_id, slice_name, payload)

    # -- honest behaviors ------------------------------------------------------

    def submit_flow(self, app_id: str, contr_id: str, switch_id: str, content: bytes) -> None:
        app = self.entities[app_id]
        id_flow = self.next_id(f"{app_id}-f")
        sig = ds_sign(app.keys, flow_message(id_flow, contr_id, content))
        flow = Flow(id_flow, content, app.keys.public, contr_id, switch_id, sig)
        self.send(app_id, contr_id, FlowSubmission(flow))

    def connect_switch(self, switch_id: str, contr_id: str) -> None:
        switch = self.entities[switch_id]
        contr = self.entities[contr_id]
        existing = self.sessions.get((switch_id, contr_id))
        if existing is None or existing.tswitch_id is None:
            nonce = self.rng.take(16)
            com = ae_encrypt(
                self.params,
                contr.keys.public,
                canonical_encode(ComPayload(nonce, ds_sign(switch.keys, com_message(nonce)))),
                self.rng,
            )
            request_keys = switch.keys
            prior = None
        else:
            # Key update: rotate the long-term key, prove continuity with the
            # original nonce signed under the previously registered key.
            rotated = ds_keygen(self.params, self.rng.take(32))
            old_keys = switch.keys
            switch.keys = rotated
            self.admitted_switches[switch_id] = rotated.public
            nonce = existing.nonce
            com = ae_encrypt(
                self.params,
                contr.keys.public,
                canonical_encode(ComPayload(nonce, ds_sign(old_keys, com_message(nonce)))),
                self.rng,
            )
            request_keys = rotated
            prior = existing.tswitch_id
        ephemeral_Y, ctx = homqv_initiate(
            request_keys,
            contr.keys.public,
            switch_id.encode("utf-8"),
            contr_id.encode("utf-8"),
            self.rng.take(32),
        )
        request = ConnectionRequest(
            request_keys.public, com, ephemeral_Y, switch.slice, contr_id, prior
        )
        self.sessions[(switch_id, contr_id)] = SessionState(
            switch_id, contr_id, nonce, com,
            existing.tswitch_id if existing else None,
            ctx.session_key,
            existing.contr_key if existing else None,
        )
        self.conn_log.append((switch_id, request))
        self.send(switch_id, contr_id, ConnRequestMsg(request))

    def request_resources(self, app_id: str) -> None:
        """The app asks its controller for every declared resource once."""
        contr_id = self.entities[app_id].contr
        for resource_id in sorted(self.store.resources):
            self.send(app_id, contr_id, ResourceRequest(resource_id))

    # -- adversary injection ----------------------------------------------------

    def inject_adversary(self, config: AdversaryConfig) -> None:
        """Schedule labeled malicious actions; entity targets are checked when
        the attack fires, since they may not have spawned yet."""
        if config.kind is AdversaryKind.BYZANTINE_VALIDATOR:
            if not config.target.startswith("v") or not config.target[1:].isdigit():
                raise UnknownTarget(config.target)
            if int(config.target[1:]) >= self.config.validators:
                raise UnknownTarget(config.target)
        self.adversaries.append(config)

    def _run_attack(self, config: AdversaryConfig) -> None:
        if (
            config.kind
            not in (AdversaryKind.BYZANTINE_VALIDATOR, AdversaryKind.SPOOF_SWITCH)
            and config.target not in self.entities
        ):
            raise UnknownTarget(f"{config.kind.value} target {config.target}")
        record = AttackRecord(config.kind, config.target, self.tick)
        self.attacks.append(record)
        attack_index = len(self.attacks) - 1
        kind = config.kind
        if kind is AdversaryKind.CRASH_CONTROLLER:
            self.crashed.add(config.target)
            record.executed = True
            record.detail = "controller silenced"
            self.log(f"attack crash_controller target={config.target} -> silenced")
            return
        if kind is AdversaryKind.BYZANTINE_VALIDATOR:
            idx = int(config.target[1:])
            self.ledger.validators.behaviors[idx] = Behavior.EQUIVOCATING
            record.executed = True
            record.detail = "validator equivocating"
            self.log(f"attack byzantine_validator target={config.target} -> equivocating")
            return
        if kind is AdversaryKind.SPOOF_SWITCH:
            record.executed = True
            self._spoof_switch(config.target, record)
            return
        if kind in (AdversaryKind.REPLAY_FLOW, AdversaryKind.FORGED_FLOW,
                    AdversaryKind.TAMPER_FLOW_CONTENT):
            self._flow_attack(kind, config.target, record, attack_index)
            return
        if kind is AdversaryKind.REPLAY_CONNECTION:
            past = [(sid, req) for sid, req in self.conn_log
                    if sid == config.target and req.prior_request_id is None]
            if not past:
                record.detail = "no committed request to replay"
                self.log(f"attack replay_connection target={config.target} -> no-op")
                return
            sid, req = past[-1]
            record.executed = True
            self.log(f"attack replay_connection target={config.target} -> sent")
            self.send(sid, req.id_contr, ConnRequestMsg(req), attack_index)
            return
        raise UnknownTarget(f"unhandled adversary kind {kind}")

    def _spoof_switch(self, target: str, record: AttackRecord) -> None:
        if target in self.entities:
            try:
                self.spawn_entity(EntityKind.SWITCH, target, slice_name="spoofed")
                record.detected = False
                record.detail = "duplicate id accepted"
            except DuplicateId:
                record.detected = True
                record.detail = "duplicate_id"
            self.log(f"attack spoof_switch target={target} -> {record.detail}")
            return
        # Fresh id with an unearned puzzle: claim difficulty but do no work.
        fake = PuzzleSolution(target.encode("utf-8"), nonce=0, difficulty=self.config.difficulty)
        if verify_puzzle(fake) and fake.difficulty >= self.config.difficulty:
            record.detected = False
            record.detail = "unearned puzzle accepted"
        else:
            try:
                self.spawn_entity(EntityKind.SWITCH, target, slice_name="spoofed", puzzle=fake)
                record.detected = False
                record.detail = "bad puzzle accepted"
            except BadPuzzle:
                record.detected = True
                record.detail = "bad_puzzle"
        self.log(f"attack spoof_switch target={target} -> {record.detail}")

    def _flow_attack(self, kind: AdversaryKind, target: str, record: AttackRecord,
                     attack_index: int) -> None:
        past = [f for f in self.flow_log if self.entities.get(target) and
                f.pk_app == self.entities[target].keys.public]
        if kind is AdversaryKind.REPLAY_FLOW:
            committed = [f for f in past if self.index.flow_seen(f.id_flow)]
            if not committed:
                record.detail = "no committed flow to replay"
                self.log(f"attack replay_flow target={target} -> no-op")
                return
            flow = committed[-1]
        elif kind is AdversaryKind.TAMPER_FLOW_CONTENT:
            if not past:
                record.detail = "no flow to tamper"
                self.log(f"attack tamper_flow_content target={target} -> no-op")
                return
            orig = past[-1]
            tampered = bytes([orig.content[0] ^ 0xFF]) + orig.content[1:] if orig.content else b"\xff"
            flow = replace(orig, id_flow=orig.id_flow + "-tampered", content=tampered)
        else:  # FORGED_FLOW: fabricate a flow in the target's name
            app = self.entities[target]
            contr_id = app.contr or self._app_controller(target)
            flow = Flow(
                self.next_id(f"{target}-forged-f"),
                b"forged-content",
                app.keys.public,
                contr_id,
                self._any_switch_of(contr_id),
                Signature(commitment=1, response=0),
            )
        record.executed = True
        self.log(f"attack {kind.value} target={target} flow={flow.id_flow} -> sent")
        self.send(target, flow.id_contr, FlowSubmission(flow), attack_index)

    def _app_controller(self, app_id: str) -> str:
        tx_id = self.registration_txid.get(app_id)
        if tx_id is None:
            return ""
        tx = self.index.tx_by_id.get(tx_id)
        return tx.id_contr if tx is not None else ""

    def _any_switch_of(self, contr_id: str) -> str:
        switches = self.index.switches_of_controller(contr_id)
        return switches[0] if switches else "unknown-switch"

    # -- per-tick machinery ------------------------------------------------------

    def step(self, scheduled_actions=()) -> None:
        self.tick += 1
        for action in scheduled_actions:
            action(self)
        for config in self.adversaries:
            if self.tick in config.schedule:
                self._run_attack(config)
        due = sorted(
            (m for m in self.queue if m.tick <= self.tick),
            key=lambda m: (m.from_id, m.to_id, m.seq),
        )
        self.queue = [m for m in self.queue if m.tick > self.tick]
        for message in due:
            self._deliver(message)
        outcome = self.ledger.consensus_round(timestamp=self.tick)
        if outcome.committed is not None:
            block = outcome.committed
            kinds = {}
            for tx in block.tx_list:
                kinds[type(tx).__name__] = kinds.get(type(tx).__name__, 0) + 1
            detail = " ".join(f"{k}={v}" for k, v in sorted(kinds.items()))
            self.log(f"commit height={block.height} txs={len(block.tx_list)} {detail}".rstrip())
        else:
            self.log(f"round {outcome.reason}")
        self._check_safety()

    def _check_safety(self) -> None:
        chain_hashes = [b.block_hash for b in self.ledger.chain]
        if chain_hashes[: len(self._committed_hashes)] != self._committed_hashes:
            self.safety_violations += 1
            self.log("SAFETY VIOLATION: committed block removed")
        self._committed_hashes = chain_hashes
        if not self.ledger.honest_chains_prefix_consistent():
            self.safety_violations += 1
            self.log("SAFETY VIOLATION: honest chains diverged")

    def _on_commit(self, ledger: Ledger, block) -> list:
        self.index.index_block(block)
        emitted = []
        for tx in block.tx_list:
            if isinstance(tx, (TFlowAfore, TFlowAfter)):
                afore_id = self.index.flow_afore_by_flow.get(tx.id_flow)
                after_id = self.index.flow_after_by_flow.get(tx.id_flow)
                agg = TFlow(afore_id, after_id) if afore_id and after_id else None
                if agg is not None and agg not in emitted:
                    emitted.append(agg)
        for notification in arbitration_loss_notify(block, self.index):
            self.notifications.append(notification)
            self.log(
                f"notify {notification.recipient} arbitration_loss flow={notification.subject}"
            )
            self.send("control-plane", notification.recipient, NotificationMsg(
                NotificationKind.ARBITRATION_LOSS, notification.subject))
        for notification in controller_failed_notify(self.index, self.config.window):
            self.notifications.append(notification)
            self.log(
                f"notify {notification.recipient} controller_failed contr={notification.subject}"
            )
            self.send("control-plane", notification.recipient, NotificationMsg(
                NotificationKind.CONTROLLER_FAILED, notification.subject))
            for attack in self.attacks:
                if (
                    attack.kind is AdversaryKind.CRASH_CONTROLLER
                    and attack.target == notification.subject
                    and attack.detected is None
                ):
                    attack.detected = True
                    attack.detail = f"failure notified at height {block.height}"
        return emitted

    # -- message handling -----------------------------------------------------

    def _deliver(self, message: SimMessage) -> None:
        recipient = self.entities.get(message.to_id)
        if message.to_id in self.crashed:
            self.log(f"drop {type(message.payload).__name__} to crashed {message.to_id}")
            return
        if recipient is None:
            self.log(f"drop {type(message.payload).__name__} to unknown {message.to_id}")
            return
        payload = message.payload
        if isinstance(payload, FlowSubmission):
            self._handle_flow(recipient, message, payload.flow)
        elif isinstance(payload, ConnRequestMsg):
            self._handle_connection(recipient, message, payload.request)
        elif isinstance(payload, InstallFlow):
            self._handle_install(recipient, message, payload)
        elif isinstance(payload, InstallAck):
            self._handle_install_ack(recipient, message, payload)
        elif isinstance(payload, EventReport):
            self._handle_event_report(recipient, message, payload)
        elif isinstance(payload, PacketIn):
            self._handle_packet_in(recipient, message, payload)
        elif isinstance(payload, ResourceRequest):
            self._handle_resource_request(recipient, message, payload)
        elif isinstance(payload, NotificationMsg):
            self.log(f"{message.to_id} received {payload.kind.value} {payload.subject}")

    def _mark_attack(self, message: SimMessage, detected: bool, detail: str) -> None:
        if message.attack_index is None:
            return
        record = self.attacks[message.attack_index]
        record.detected = detected
        record.detail = detail

    def _handle_flow(self, contr: EntityRecord, message: SimMessage, flow: Flow) -> None:
        if contr.kind is not EntityKind.CONTROLLER:
            return
        if message.attack_index is None:
            self.flow_log.append(flow)
        verdict = auth_flow(flow, self.index, self.reputation, self.params)
        self._count(f"flow_{verdict.reason.value}")
        self.log(f"flow {flow.id_flow} -> {verdict.reason.value}")
        self._mark_attack(message, not verdict.accepted, verdict.reason.value)
        if not verdict.accepted:
            return
        self._submit(verdict.afore, f"t_flow_afore {flow.id_flow}")
        self.pending_installs.setdefault((contr.id, flow.id_switch), []).append(
            (flow.id_flow, flow.content)
        )
        self._flush_installs(contr.id, flow.id_switch)

    def _flush_installs(self, contr_id: str, switch_id: str) -> None:
        session = self.sessions.get((switch_id, contr_id))
        if session is None or session.contr_key is None:
            return  # no authenticated channel yet
        pending = self.pending_installs.get((contr_id, switch_id), [])
        remaining = []
        for id_flow, content in pending:
            key = conflict_key(content)
            slot = self.installed.setdefault(switch_id, {})
            if key in slot and slot[key][1] != content:
                self.log(f"arbitration {id_flow} loses to {slot[key][0]} on {switch_id}")
                continue
            self.send(contr_id, switch_id, InstallFlow(id_flow, content))
        self.pending_installs[(contr_id, switch_id)] = remaining

    def _handle_connection(self, contr: EntityRecord, message: SimMessage,
                           request: ConnectionRequest) -> None:
        if contr.kind is not EntityKind.CONTROLLER:
            return
        verdict = audit_authen_request(
            message.from_id,
            request,
            contr.keys,
            contr.id,
            self.index,
            self.reputation,
            self.admitted_switches,
        )
        self._count(f"connect_{verdict.reason.value}")
        self.log(f"connect {message.from_id}->{contr.id} -> {verdict.reason.value}")
        self._mark_attack(message, not verdict.accepted, verdict.reason.value)
        if not verdict.accepted:
            return
        for tx in verdict.txs_to_submit:
            self._submit(tx, f"register {type(tx).__name__} for {message.from_id}")
        session = self.sessions.get((message.from_id, contr.id))
        if session is not None:
            session.contr_key = verdict.session.session_key
            if verdict.txs_to_submit:
                session.tswitch_id = txid(verdict.txs_to_submit[0])
            agreed = session.switch_key == verdict.session.session_key
            self.log(f"session {message.from_id}<->{contr.id} key_agreement={str(agreed).lower()}")
        # First packet the switch cannot match triggers a Packet-In probe.
        self.send(message.from_id, message.from_id, PacketIn(sha256(pack("probe", message.from_id))), delay=1)

    def _handle_install(self, switch: EntityRecord, message: SimMessage,
                        payload: InstallFlow) -> None:
        if switch.kind is not EntityKind.SWITCH:
            return
        slot = self.installed.setdefault(switch.id, {})
        key = conflict_key(payload.content)
        if key in slot and slot[key][1] != payload.content:
            self.log(f"switch {switch.id} refuses conflicting install {payload.id_flow}")
            return
        slot[key] = (payload.id_flow, payload.content)
        table_state = sha256(pack(*(fid for fid, _ in sorted(slot.values()))))
        self.send(switch.id, message.from_id, InstallAck(payload.id_flow, table_state))
        self.send(
            switch.id,
            message.from_id,
            EventReport(
                self.next_id(f"{switch.id}-e"),
                event_payload_for_flow(payload.id_flow, b"install"),
            ),
        )

    def _handle_install_ack(self, contr: EntityRecord, message: SimMessage,
                            payload: InstallAck) -> None:
        if contr.kind is not EntityKind.CONTROLLER:
            return
        self._submit(
            TFlowAfter(payload.id_flow, contr.id, message.from_id, payload.state),
            f"t_flow_after {payload.id_flow}",
        )

    def _handle_event_report(self, contr: EntityRecord, message: SimMessage,
                             payload: EventReport) -> None:
        if contr.kind is not EntityKind.CONTROLLER:
            return
        pk = self.admitted_switches.get(message.from_id)
        if pk is None:
            return
        self._submit(
            TEvent(payload.id_event, pk, contr.id, message.from_id, payload.payload),
            f"t_event {payload.id_event}",
        )

    def _handle_packet_in(self, switch: EntityRecord, message: SimMessage,
                          payload: PacketIn) -> None:
        # Self-addressed probe: forward to every controller this switch has a
        # session with; the controller records the event and pushes anything
        # pending for installation.
        if switch.kind is not EntityKind.SWITCH:
            return
        for (sid, cid), session in sorted(self.sessions.items()):
            if sid != switch.id or session.contr_key is None:
                continue
            self.send(
                switch.id,
                cid,
                EventReport(
                    self.next_id(f"{switch.id}-e"),
                    event_payload_for_flow("", payload.digest),
                ),
            )
            self._flush_installs(cid, switch.id)

    def _handle_resource_request(self, contr: EntityRecord, message: SimMessage,
                                 payload: ResourceRequest) -> None:
        if contr.kind is not EntityKind.CONTROLLER:
            return
        app_id = message.from_id
        try:
            ciphertext, minted_key = access_control_serve(
                app_id, payload.resource_id, self.store, self.index
            )
        except (UnknownApp, UnknownResource) as exc:
            self.log(f"resource {payload.resource_id} for {app_id} -> {type(exc).__name__}")
            return
        if minted_key is not None:
            self.app_abe_keys[app_id] = minted_key
        key = self.app_abe_keys.get(app_id)
        if key is None:
            self.log(f"resource {payload.resource_id} for {app_id} -> no key")
            return
        try:
            abe_decrypt(ciphertext, key)
            outcome = "granted"
        except PolicyUnsatisfied:
            outcome = "denied"
        self.log(f"resource {payload.resource_id} for {app_id} -> {outcome}")
