import dataclasses

import pytest

from chainsdn.crypto import TEST_GROUP, Drbg, ae_encrypt, ds_keygen, ds_sign
from chainsdn.encoding import canonical_encode
from chainsdn.ledger import Ledger
from chainsdn.protocols import ComPayload, com_message
from chainsdn.transactions import (
    TApp,
    TAppContr,
    TContr,
    TContrSwitch,
    TSwitch,
    app_message,
    contr_message,
    txid,
)
from chainsdn.txgraph import AuditIndex


@dataclasses.dataclass
class Registered:
    """A ledger with controllers, apps, and switches already on-chain."""

    ledger: Ledger
    index: AuditIndex
    contr_keys: dict
    app_keys: dict
    switch_keys: dict
    app_contr: dict  # app id -> controller id
    switch_contr: dict  # switch id -> controller id
    switch_nonce: dict  # switch id -> commitment nonce
    tswitch_id: dict  # switch id -> TSwitch tx id

    def commit(self, timestamp=None):
        ts = timestamp if timestamp is not None else self.ledger.chain[-1].height + 1
        outcome = self.ledger.consensus_round(timestamp=ts)
        assert outcome.committed is not None, outcome.reason
        self.index.index_chain(self.ledger.chain)
        return outcome.committed

    def submit(self, tx):
        admission = self.ledger.submit_tx(tx)
        assert admission.admitted, admission.reason
        return admission.id_tx


def build_registered(
    contrs=(("c1", "slice1"), ("c2", "slice3")),
    apps=(("app1", "traffic engineering", "c1"),),
    switches=(("s1", "slice1", "c1"), ("s2", "slice2", "c1")),
    rng_seed=b"fixture",
):
    """Commit a full registration graph onto a fresh TEST-group ledger."""
    ledger = Ledger(TEST_GROUP)
    index = AuditIndex()
    index.index_chain(ledger.chain)
    rng = Drbg(rng_seed)
    reg = Registered(ledger, index, {}, {}, {}, {}, {}, {}, {})

    contr_txid = {}
    for cid, slice_name in contrs:
        keys = ds_keygen(TEST_GROUP, rng.take(16))
        reg.contr_keys[cid] = keys
        tx = TContr(cid, keys.public, slice_name, ds_sign(keys, contr_message(cid, slice_name)))
        contr_txid[cid] = reg.submit(tx)
    for aid, category, cid in apps:
        keys = ds_keygen(TEST_GROUP, rng.take(16))
        reg.app_keys[aid] = keys
        reg.app_contr[aid] = cid
        tx = TApp(aid, keys.public, category, cid, ds_sign(keys, app_message(aid, category, cid)))
        id_t_app = reg.submit(tx)
        reg.submit(TAppContr(id_t_app, contr_txid[cid]))
    for sid, slice_name, cid in switches:
        keys = ds_keygen(TEST_GROUP, rng.take(16))
        reg.switch_keys[sid] = keys
        reg.switch_contr[sid] = cid
        nonce = rng.take(16)
        reg.switch_nonce[sid] = nonce
        com = ae_encrypt(
            TEST_GROUP,
            reg.contr_keys[cid].public,
            canonical_encode(ComPayload(nonce, ds_sign(keys, com_message(nonce)))),
            rng,
        )
        tx = TSwitch(sid, keys.public, slice_name, cid, com)
        id_t_switch = reg.submit(tx)
        reg.tswitch_id[sid] = id_t_switch
        reg.submit(TContrSwitch(contr_txid[cid], id_t_switch))
    reg.commit(timestamp=1)
    return reg


@pytest.fixture
def registered():
    return build_registered()
