"""Key-policy attribute-based encryption over the Schnorr group.

Resources are encrypted under a set of attribute labels; decryption keys carry
an AND/OR access tree. A key opens a ciphertext exactly when its tree is
satisfied by the ciphertext labels, and the two sides meet in the exponent:

  setup     per-attribute master scalar t_a with public T_a = g^t_a, plus a
            global blinding pair (s, S = g^s)
  encrypt   fresh k: C0 = g^k, C_a = T_a^k per label, payload sealed under
            a key hashed from S^k
  keygen    fresh root secret u shared down the tree (n-of-n at AND gates,
            duplicated at OR gates); each leaf share is divided by its
            attribute's master scalar; the key also carries s - u
  decrypt   satisfied leaves give C_a^(share) = g^(k * lambda); multiplying a
            satisfying set back together yields g^(k*u), and g^(k*u) * C0^(s-u)
            is S^k again

Giving every key its own root secret means shares pooled across two keys
reconstruct nothing useful, which is the desk-scale collusion property the
tests exercise. The payload itself is sealed with the authenticated symmetric
cipher, so a wrong reconstruction is always rejected, never silently wrong.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .crypto import (
    DOMAIN_KDF,
    DecryptReject,
    Drbg,
    GroupParams,
    SIM_GROUP,
    TEST_GROUP,
    fresh_drbg,
    sha256,
    symmetric_decrypt,
    symmetric_encrypt,
)
from .encoding import pack, register_record

MAX_UNIVERSE = 64
MAX_TREE_DEPTH = 8
MAX_ATTRIBUTE_BYTES = 128


class EmptyUniverse(Exception):
    pass


class UnknownAttribute(Exception):
    pass


class MalformedTree(Exception):
    pass


class PolicyUnsatisfied(Exception):
    """The key's access tree is not satisfied by the ciphertext labels."""


class PayloadTamper(Exception):
    """Authenticated payload decryption failed."""


@dataclass(frozen=True)
class AttributeSet:
    attributes: frozenset[str]

    def __init__(self, attributes):
        attrs = frozenset(attributes)
        if not attrs:
            raise ValueError("attribute set must be nonempty")
        for a in attrs:
            if not a or len(a.encode("utf-8")) > MAX_ATTRIBUTE_BYTES:
                raise ValueError(f"bad attribute {a!r}")
        object.__setattr__(self, "attributes", attrs)

    def __iter__(self):
        return iter(sorted(self.attributes))

    def __contains__(self, item):
        return item in self.attributes


class GateKind(Enum):
    AND = "AND"
    OR = "OR"


@dataclass(frozen=True)
class Leaf:
    attribute: str


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    children: tuple


AccessTree = Leaf | Gate


def validate_tree(tree: AccessTree, universe: frozenset[str] | None = None) -> None:
    def walk(node, depth):
        if depth > MAX_TREE_DEPTH:
            raise MalformedTree(f"tree deeper than {MAX_TREE_DEPTH}")
        if isinstance(node, Leaf):
            if universe is not None and node.attribute not in universe:
                raise UnknownAttribute(node.attribute)
            return
        if isinstance(node, Gate):
            if len(node.children) < 2:
                raise MalformedTree("gate with fewer than 2 children")
            for child in node.children:
                walk(child, depth + 1)
            return
        raise MalformedTree(f"not a tree node: {node!r}")

    walk(tree, 0)


def tree_satisfies(policy: AccessTree, attrs: AttributeSet | frozenset | set) -> bool:
    """Plain boolean evaluation of the access tree against a label set."""
    labels = attrs.attributes if isinstance(attrs, AttributeSet) else frozenset(attrs)
    if isinstance(policy, Leaf):
        return policy.attribute in labels
    if policy.kind is GateKind.AND:
        return all(tree_satisfies(c, labels) for c in policy.children)
    return any(tree_satisfies(c, labels) for c in policy.children)


@dataclass(frozen=True)
class AbePublicParams:
    group: GroupParams
    universe: tuple[str, ...]
    attribute_public: dict  # attribute -> g^t_a
    blind_public: int  # S = g^s


@dataclass(frozen=True)
class AbeParams:
    public: AbePublicParams
    attribute_master: dict  # attribute -> t_a
    blind_master: int  # s
    security_parameter: int


@dataclass(frozen=True)
class AbeCiphertext:
    label_attributes: AttributeSet
    encap_base: int  # C0 = g^k
    per_attribute_components: dict  # attribute -> T_a^k
    payload: bytes
    group: GroupParams


@dataclass(frozen=True)
class AbeKey:
    policy: AccessTree
    per_leaf_shares: dict  # preorder leaf index -> blinded share
    unblind: int  # s - u mod q


def abe_setup(
    security_parameter: int,
    universe,
    rng_seed: bytes,
    group: GroupParams | None = None,
) -> AbeParams:
    """Mint master/public material covering exactly the given attribute universe."""
    attrs = tuple(sorted(set(universe)))
    if not attrs:
        raise EmptyUniverse("universe must be nonempty")
    if len(attrs) > MAX_UNIVERSE:
        raise ValueError(f"universe larger than {MAX_UNIVERSE}")
    for a in attrs:
        if not a or len(a.encode("utf-8")) > MAX_ATTRIBUTE_BYTES:
            raise ValueError(f"bad attribute {a!r}")
    if group is None:
        group = TEST_GROUP if security_parameter < 64 else SIM_GROUP
    rng = Drbg(rng_seed, b"abe-setup")
    g, p = group.generator_g, group.modulus_p
    master = {a: rng.scalar(group) for a in attrs}
    public = {a: pow(g, t, p) for a, t in master.items()}
    s = rng.scalar(group)
    return AbeParams(
        public=AbePublicParams(group, attrs, public, pow(g, s, p)),
        attribute_master=master,
        blind_master=s,
        security_parameter=security_parameter,
    )


def _public(params) -> AbePublicParams:
    return params.public if isinstance(params, AbeParams) else params


def _payload_key(group: GroupParams, sealed: int, encap_base: int) -> bytes:
    return sha256(DOMAIN_KDF, pack(sealed, encap_base))


def abe_encrypt(
    message: bytes,
    attrs: AttributeSet,
    params: AbeParams | AbePublicParams,
    rng: Drbg | None = None,
) -> AbeCiphertext:
    pub = _public(params)
    unknown = set(attrs.attributes) - set(pub.universe)
    if unknown:
        raise UnknownAttribute(str(sorted(unknown)))
    rng = rng or fresh_drbg()
    group = pub.group
    k = rng.scalar(group)
    encap_base = pow(group.generator_g, k, group.modulus_p)
    components = {a: pow(pub.attribute_public[a], k, group.modulus_p) for a in attrs}
    sealed = pow(pub.blind_public, k, group.modulus_p)
    key = _payload_key(group, sealed, encap_base)
    return AbeCiphertext(
        attrs, encap_base, components, symmetric_encrypt(key, message, rng), group
    )


def _share_tree(tree: AccessTree, secret: int, q: int, rng: Drbg) -> dict:
    """Top-down sharing: AND splits n-of-n additively, OR duplicates."""
    shares: dict[int, int] = {}
    counter = [0]

    def walk(node, value):
        idx = counter[0]
        counter[0] += 1
        if isinstance(node, Leaf):
            shares[idx] = value
            return
        if node.kind is GateKind.OR:
            for child in node.children:
                walk(child, value)
            return
        parts = [rng.uint(q) for _ in node.children[:-1]]
        parts.append((value - sum(parts)) % q)
        for child, part in zip(node.children, parts):
            walk(child, part)

    walk(tree, secret)
    return shares


def abe_keygen(policy: AccessTree, params: AbeParams, rng_seed: bytes) -> AbeKey:
    pub = params.public
    validate_tree(policy, frozenset(pub.universe))
    q = pub.group.order_q
    rng = Drbg(rng_seed, b"abe-keygen")
    u = rng.scalar(pub.group)
    raw_shares = _share_tree(policy, u, q, rng)

    def leaf_attr_at(tree):
        # Preorder walk mirroring _share_tree's numbering.
        out = {}
        counter = [0]

        def walk(node):
            idx = counter[0]
            counter[0] += 1
            if isinstance(node, Leaf):
                out[idx] = node.attribute
            else:
                for child in node.children:
                    walk(child)

        walk(tree)
        return out

    attrs_by_idx = leaf_attr_at(policy)
    blinded = {
        idx: (share * pow(params.attribute_master[attrs_by_idx[idx]], -1, q)) % q
        for idx, share in raw_shares.items()
    }
    return AbeKey(policy, blinded, (params.blind_master - u) % q)


def _reconstruct(node, index, key: AbeKey, ct: AbeCiphertext, group: GroupParams):
    """Returns (g^(k * value-at-node), next preorder index), or None if unsatisfied."""
    idx = index[0]
    index[0] += 1
    if isinstance(node, Leaf):
        comp = ct.per_attribute_components.get(node.attribute)
        if comp is None:
            return None
        return pow(comp, key.per_leaf_shares[idx], group.modulus_p)
    if node.kind is GateKind.OR:
        winner = None
        for child in node.children:
            got = _reconstruct(child, index, key, ct, group)
            if winner is None and got is not None:
                winner = got
        return winner
    product = 1
    for child in node.children:
        got = _reconstruct(child, index, key, ct, group)
        if got is None:
            product = None
        elif product is not None:
            product = (product * got) % group.modulus_p
    return product


def abe_decrypt(ct: AbeCiphertext, key: AbeKey) -> bytes:
    """Recover the plaintext, or raise PolicyUnsatisfied / PayloadTamper."""
    if not tree_satisfies(key.policy, ct.label_attributes):
        raise PolicyUnsatisfied("labels do not satisfy the key policy")
    group = ct.group
    recovered = _reconstruct(key.policy, [0], key, ct, group)
    if recovered is None:
        raise PolicyUnsatisfied("labels do not satisfy the key policy")
    sealed = (recovered * pow(ct.encap_base, key.unblind, group.modulus_p)) % group.modulus_p
    try:
        return symmetric_decrypt(_payload_key(group, sealed, ct.encap_base), ct.payload)
    except DecryptReject as exc:
        raise PayloadTamper(str(exc)) from exc


register_record(AttributeSet, 14, encoder=lambda v: pack(v.attributes))
register_record(Leaf, 15)
register_record(Gate, 16, encoder=lambda v: pack(v.kind.value, v.children))
register_record(
    AbeCiphertext,
    17,
    encoder=lambda v: pack(
        v.label_attributes,
        v.encap_base,
        tuple(sorted(v.per_attribute_components.items())),
        v.payload,
    ),
)
register_record(
    AbeKey,
    18,
    encoder=lambda v: pack(v.policy, tuple(sorted(v.per_leaf_shares.items())), v.unblind),
)
