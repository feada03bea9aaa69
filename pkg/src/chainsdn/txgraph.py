"""Materialized indices over the committed chain and the three audit walks.

Blocks are indexed in height order and every query answers exactly what a
from-genesis rescan would answer: the registration path behind a flow, whether
a flow id has been seen before, and which controllers have gone quiet. The
index is rebuilt from genesis when a dump is loaded; the chain stays the only
source of truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .transactions import (
    Block,
    TApp,
    TAppContr,
    TContr,
    TContrSwitch,
    TEvent,
    TFlowAfore,
    TFlowAfter,
    TSwitch,
    txid,
)


class OutOfOrder(Exception):
    """Blocks must be indexed consecutively from genesis."""


@dataclass
class AuditIndex:
    height_indexed: int = -1
    tx_by_id: dict = field(default_factory=dict)  # id_tx -> tx
    height_by_id: dict = field(default_factory=dict)  # id_tx -> height
    by_pk_app: dict = field(default_factory=dict)  # pk_app -> TApp tx id (first)
    app_by_id: dict = field(default_factory=dict)  # id_app -> TApp tx id (first)
    by_id_contr: dict = field(default_factory=dict)  # id_contr -> TContr tx id (first)
    switch_tx_ids: dict = field(default_factory=dict)  # id_switch -> [TSwitch tx ids]
    switch_pk: dict = field(default_factory=dict)  # id_switch -> pk at first registration
    app_contr_edges: set = field(default_factory=set)  # (id_t_app, id_t_contr)
    contr_switch_edges: set = field(default_factory=set)  # (id_t_contr, id_t_switch)
    flows_seen: set = field(default_factory=set)  # id_flow with a TFlowAfore
    flow_afore_by_flow: dict = field(default_factory=dict)  # id_flow -> tx id
    flow_after_by_flow: dict = field(default_factory=dict)  # id_flow -> tx id
    activity_by_contr: dict = field(default_factory=dict)  # id_contr -> last active height
    contr_registered_at: dict = field(default_factory=dict)  # id_contr -> height
    tswitch_request_keys: set = field(default_factory=set)  # (pk_switch, com bytes)
    event_tx_by_id: dict = field(default_factory=dict)  # id_event -> tx id

    def index_block(self, block: Block) -> None:
        if block.height != self.height_indexed + 1:
            raise OutOfOrder(
                f"got height {block.height}, expected {self.height_indexed + 1}"
            )
        h = block.height
        for tx in block.tx_list:
            id_tx = txid(tx)
            self.tx_by_id[id_tx] = tx
            self.height_by_id[id_tx] = h
            if isinstance(tx, TContr):
                self.by_id_contr.setdefault(tx.id_contr, id_tx)
                self.contr_registered_at.setdefault(tx.id_contr, h)
            elif isinstance(tx, TApp):
                self.by_pk_app.setdefault(tx.pk_app, id_tx)
                self.app_by_id.setdefault(tx.id_app, id_tx)
            elif isinstance(tx, TAppContr):
                self.app_contr_edges.add((tx.id_t_app, tx.id_t_contr))
            elif isinstance(tx, TSwitch):
                self.switch_tx_ids.setdefault(tx.id_switch, []).append(id_tx)
                self.switch_pk.setdefault(tx.id_switch, tx.pk_switch)
                self.tswitch_request_keys.add(
                    (tx.pk_switch, tx.com.key_encapsulation, tx.com.payload)
                )
            elif isinstance(tx, TContrSwitch):
                self.contr_switch_edges.add((tx.id_t_contr, tx.id_t_switch))
            elif isinstance(tx, TFlowAfore):
                self.flows_seen.add(tx.id_flow)
                self.flow_afore_by_flow.setdefault(tx.id_flow, id_tx)
            elif isinstance(tx, TFlowAfter):
                self.flow_after_by_flow.setdefault(tx.id_flow, id_tx)
                self.activity_by_contr[tx.id_contr] = h
            elif isinstance(tx, TEvent):
                self.event_tx_by_id.setdefault(tx.id_event, id_tx)
                self.activity_by_contr[tx.id_contr] = h
        self.height_indexed = h

    def index_chain(self, chain: list) -> None:
        for block in chain[self.height_indexed + 1 :]:
            self.index_block(block)

    # -- audit walks ---------------------------------------------------------

    def flow_auth_path(self, pk_app: int, id_contr: str, id_switch: str) -> bool:
        """Registration walk: app record, app-controller edge, controller-switch edge."""
        id_t_app = self.by_pk_app.get(pk_app)
        id_t_contr = self.by_id_contr.get(id_contr)
        if id_t_app is None or id_t_contr is None:
            return False
        if (id_t_app, id_t_contr) not in self.app_contr_edges:
            return False
        return any(
            (id_t_contr, id_t_switch) in self.contr_switch_edges
            for id_t_switch in self.switch_tx_ids.get(id_switch, ())
        )

    def flow_seen(self, id_flow: str) -> bool:
        return id_flow in self.flows_seen

    def inactive_controllers(self, window: int) -> list:
        """Registered controllers with no activity in the last `window` blocks.

        A controller registered inside the window is exempt: it cannot have
        been expected to act before it existed.
        """
        if window < 1:
            raise ValueError("window must be >= 1")
        tip = self.height_indexed
        cutoff = tip - window + 1
        out = []
        for id_contr in sorted(self.by_id_contr):
            if self.contr_registered_at[id_contr] >= cutoff:
                continue
            last = self.activity_by_contr.get(id_contr)
            if last is None or last < cutoff:
                out.append(id_contr)
        return out

    def newly_inactive_controllers(self, window: int) -> list:
        """Controllers inactive now that were not inactive one block earlier.

        This is what the failure-notification hook fires on, so a dead
        controller is reported exactly once per outage rather than every
        block (and again only after fresh activity followed by fresh
        silence). A controller in the inactive set has no tip activity, so
        its last-activity height reads the same at both heights and this
        stays a pure function of the chain prefix.
        """
        tip = self.height_indexed
        out = []
        for id_contr in self.inactive_controllers(window):
            reg = self.contr_registered_at[id_contr]
            last = self.activity_by_contr.get(id_contr)
            was_inactive = reg <= tip - 1 - window and (last is None or last < tip - window)
            if not was_inactive:
                out.append(id_contr)
        return out

    def switches_of_controller(self, id_contr: str) -> list:
        """Switch ids linked to the controller through controller-switch edges."""
        id_t_contr = self.by_id_contr.get(id_contr)
        if id_t_contr is None:
            return []
        out = set()
        for (tc, ts) in self.contr_switch_edges:
            if tc != id_t_contr:
                continue
            tx = self.tx_by_id.get(ts)
            if isinstance(tx, TSwitch):
                out.add(tx.id_switch)
        return sorted(out)
