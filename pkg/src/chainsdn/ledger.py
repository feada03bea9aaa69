"""Transaction pool, simulated BFT consensus, commit hooks, chain verification.

Consensus is an in-process round model with injectable validator behaviors.
A round has one leader (round-robin by height), a proposal per recipient, a
vote per recipient, and a per-validator tally: a validator commits the block
it was proposed once it sees 2f+1 matching votes. Honest validators that miss
quorum catch up when somebody commits, so honest chains are always prefix
consistent and a committed block is never abandoned.

Commit hooks stand in for on-chain programs: deterministic handlers run in
registration order after each commit, and anything they submit lands in the
pool for the next round, never the current block.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .crypto import GroupParams
from .encoding import Reader, canonical_decode, canonical_encode, frame
from .transactions import (
    Block,
    Transaction,
    genesis_block,
    compute_block_hash,
    make_block,
    referenced_ids,
    txid,
    verify_embedded_signature,
)

BLOCK_TX_CAP = 256


class AdmissionReason(enum.Enum):
    OK = "ok"
    BAD_SIGNATURE = "bad_signature"
    DUPLICATE_TX = "duplicate_tx"
    DANGLING_REFERENCE = "dangling_reference"


@dataclass(frozen=True)
class Admission:
    admitted: bool
    reason: AdmissionReason
    id_tx: bytes


class Behavior(enum.Enum):
    HONEST = "honest"
    SILENT = "silent"
    EQUIVOCATING = "equivocating"


class HookPanic(Exception):
    """A commit hook raised; hooks must be total, so the simulation aborts."""


@dataclass
class ValidatorSet:
    behaviors: list

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("need at least 4 validators")

    @property
    def n(self) -> int:
        return len(self.behaviors)

    @property
    def f(self) -> int:
        return (self.n - 1) // 3

    @property
    def quorum(self) -> int:
        return 2 * self.f + 1

    @classmethod
    def honest(cls, n: int = 4) -> "ValidatorSet":
        return cls([Behavior.HONEST] * n)


@dataclass(frozen=True)
class RoundOutcome:
    committed: Block | None
    reason: str  # "committed" | "no_quorum:<why>"
    votes_for_commit: int = 0


@dataclass
class Ledger:
    params: GroupParams
    validators: ValidatorSet = field(default_factory=ValidatorSet.honest)
    chain: list = field(default_factory=lambda: [genesis_block()])
    pool: dict = field(default_factory=dict)  # id_tx -> tx, insertion ordered
    known_ids: set = field(default_factory=set)  # ids on-chain
    hooks: list = field(default_factory=list)
    # Per-validator view of committed block hashes, for the consistency checks.
    validator_chains: list = field(default_factory=list)
    # View number: bumps on every failed round so the leader rotates.
    view: int = 0

    def __post_init__(self):
        self.known_ids = {txid(tx) for b in self.chain for tx in b.tx_list}
        self.validator_chains = [
            [b.block_hash for b in self.chain] for _ in range(self.validators.n)
        ]

    # -- pool ---------------------------------------------------------------

    def submit_tx(self, tx: Transaction) -> Admission:
        """Admit to the pending pool after signature and reference checks."""
        id_tx = txid(tx)
        if id_tx in self.known_ids or id_tx in self.pool:
            return Admission(False, AdmissionReason.DUPLICATE_TX, id_tx)
        if not verify_embedded_signature(self.params, tx):
            return Admission(False, AdmissionReason.BAD_SIGNATURE, id_tx)
        for ref in referenced_ids(tx):
            if ref not in self.known_ids and ref not in self.pool:
                return Admission(False, AdmissionReason.DANGLING_REFERENCE, id_tx)
        self.pool[id_tx] = tx
        return Admission(True, AdmissionReason.OK, id_tx)

    # -- hooks ----------------------------------------------------------------

    def register_commit_hook(self, hook) -> None:
        """hook(ledger, block) -> iterable of transactions to submit next round."""
        self.hooks.append(hook)

    def _fire_hooks(self, block: Block) -> list:
        emitted = []
        for hook in self.hooks:
            try:
                out = hook(self, block) or ()
            except Exception as exc:
                raise HookPanic(f"hook {getattr(hook, '__name__', hook)!r}: {exc}") from exc
            emitted.extend(out)
        results = [self.submit_tx(tx) for tx in emitted]
        return results

    # -- consensus ------------------------------------------------------------

    def _propose(self, timestamp: int) -> Block:
        tip = self.chain[-1]
        txs = tuple(
            self.pool[i] for i in sorted(self.pool)[:BLOCK_TX_CAP]
        )
        return make_block(tip.height + 1, timestamp, tip.block_hash, txs)

    def _conflicting_proposal(self, honest: Block) -> Block:
        """A second, different block an equivocating leader shows some peers."""
        if honest.tx_list:
            return make_block(
                honest.height, honest.timestamp, honest.prev_hash, honest.tx_list[:-1]
            )
        # Empty pool: lie about the timestamp instead.
        return make_block(honest.height, honest.timestamp + 1, honest.prev_hash, ())

    def leader_index(self) -> int:
        return (self.chain[-1].height + 1 + self.view) % self.validators.n

    def consensus_round(self, timestamp: int) -> RoundOutcome:
        vset = self.validators
        n, quorum = vset.n, vset.quorum
        leader_behavior = vset.behaviors[self.leader_index()]

        if leader_behavior is Behavior.SILENT:
            self.view += 1
            return RoundOutcome(None, "no_quorum:leader_silent")

        honest_block = self._propose(timestamp)
        proposals: list[Block | None] = [honest_block] * n
        if leader_behavior is Behavior.EQUIVOCATING:
            alt = self._conflicting_proposal(honest_block)
            for i in range(n // 2, n):
                proposals[i] = alt

        # Vote phase: votes_seen[recipient][sender] = block hash voted for.
        votes_seen: list[dict[int, bytes]] = [{} for _ in range(n)]
        for sender in range(n):
            behavior = vset.behaviors[sender]
            received = proposals[sender]
            if behavior is Behavior.SILENT or received is None:
                continue
            if behavior is Behavior.HONEST:
                if not self._valid_proposal(received):
                    continue
                for recipient in range(n):
                    votes_seen[recipient][sender] = received.block_hash
            else:  # equivocating voter: real vote to half, garbage to the rest
                fake = compute_block_hash(
                    received.height, received.timestamp, received.prev_hash, ()
                )
                for recipient in range(n):
                    vote = received.block_hash if recipient < n // 2 else fake
                    votes_seen[recipient][sender] = vote

        # Tally per honest validator.
        committed: Block | None = None
        votes_for_commit = 0
        committing_validators = []
        for v in range(n):
            if vset.behaviors[v] is not Behavior.HONEST:
                continue
            proposal = proposals[v]
            if proposal is None or not self._valid_proposal(proposal):
                continue
            matching = sum(1 for h in votes_seen[v].values() if h == proposal.block_hash)
            if matching >= quorum:
                committing_validators.append(v)
                if committed is None:
                    committed = proposal
                    votes_for_commit = matching
                elif committed.block_hash != proposal.block_hash:
                    # Structurally impossible with <= f Byzantine; guard anyway.
                    raise AssertionError("conflicting commits in one round")

        if committed is None:
            self.view += 1
            return RoundOutcome(None, "no_quorum:votes_short")

        self.view = 0
        self._append(committed)
        return RoundOutcome(committed, "committed", votes_for_commit)

    def _valid_proposal(self, block: Block) -> bool:
        tip = self.chain[-1]
        if block.height != tip.height + 1 or block.prev_hash != tip.block_hash:
            return False
        if block.block_hash != compute_block_hash(
            block.height, block.timestamp, block.prev_hash, block.tx_list
        ):
            return False
        return all(verify_embedded_signature(self.params, tx) for tx in block.tx_list)

    def _append(self, block: Block) -> None:
        self.chain.append(block)
        for tx in block.tx_list:
            id_tx = txid(tx)
            self.known_ids.add(id_tx)
            self.pool.pop(id_tx, None)
        # Finality propagation: every honest validator adopts the commit.
        for v, behavior in enumerate(self.validators.behaviors):
            if behavior is Behavior.HONEST:
                self.validator_chains[v].append(block.block_hash)
        self._fire_hooks(block)

    def honest_chains_prefix_consistent(self) -> bool:
        honest = [
            self.validator_chains[v]
            for v, b in enumerate(self.validators.behaviors)
            if b is Behavior.HONEST
        ]
        if not honest:
            return True
        shortest = min(len(c) for c in honest)
        return all(c[:shortest] == honest[0][:shortest] for c in honest)

    def get_last_n_blocks(self, n: int) -> list:
        if n < 1:
            raise ValueError("n must be >= 1")
        return list(self.chain[-n:])


@dataclass(frozen=True)
class ChainVerdict:
    ok: bool
    failure_height: int | None = None
    detail: str = ""


def verify_chain(chain: list, params: GroupParams) -> ChainVerdict:
    """Recheck links, hashes, heights, and embedded signatures of a whole chain."""
    prev_hash = None
    for i, block in enumerate(chain):
        if block.height != i:
            return ChainVerdict(False, i, f"height {block.height} != {i}")
        expected_prev = prev_hash if prev_hash is not None else bytes(32)
        if block.prev_hash != expected_prev:
            return ChainVerdict(False, i, "previous-hash link broken")
        recomputed = compute_block_hash(
            block.height, block.timestamp, block.prev_hash, block.tx_list
        )
        if block.block_hash != recomputed:
            return ChainVerdict(False, i, "block hash does not recompute")
        for tx in block.tx_list:
            if not verify_embedded_signature(params, tx):
                return ChainVerdict(False, i, f"bad signature in {type(tx).__name__}")
        prev_hash = block.block_hash
    return ChainVerdict(True)


def dump_chain(chain: list) -> bytes:
    """Length-prefixed canonical encoding of each block, concatenated."""
    return b"".join(frame(canonical_encode(b)) for b in chain)


def load_chain(data: bytes) -> list:
    reader = Reader(data)
    chain = []
    while not reader.exhausted():
        block = canonical_decode(reader.read_frame())
        if not isinstance(block, Block):
            raise ValueError("dump contains a non-block record")
        chain.append(block)
    return chain
