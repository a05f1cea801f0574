import dataclasses
import random

import pytest

from lumen import crypto, trust
from lumen.names import Name
from lumen.trust import (
    AttributeSet,
    Challenger,
    DanglingAttributeName,
    NoUsableKey,
    NotAuthorized,
    ProofReason,
    TrustRoot,
    acl_permits,
    build_acl,
    effective_access,
    effective_expires,
    evaluate_policy,
    load_acl,
    make_identity,
    parse_attributes,
    parse_generalized_time,
    prove_ownership,
    publish_key,
    verify_ownership,
)


@pytest.fixture(scope="module")
def root():
    return TrustRoot.create("/trust/root")


@pytest.fixture(scope="module")
def key_pool():
    # Pre-generated keys shared across tests; delegation-tree tests sample
    # from this pool instead of paying keygen per vertex.
    return [crypto.generate_keypair() for _ in range(10)]


class StubRegistry:
    def __init__(self, classes):
        self.classes = classes

    def class_of(self, cmd):
        return self.classes.get(cmd)


REGISTRY = StubRegistry({b"on": b"actuate", b"off": b"actuate", b"status": b"read-only"})


# --- key publication -------------------------------------------------------


def test_root_publishes_anywhere(root, key_pool):
    rec = publish_key(root, Name.parse("/dom/app1"), key_pool[0].public)
    assert rec.carrier.name == Name.parse("/dom/app1/key")
    assert crypto.verify_content(root.public, rec.carrier)


def test_owner_delegates_descendant(root, key_pool):
    owner = make_identity(root, Name.parse("/dom/app1"), key_pool[0])
    rec = publish_key(owner, Name.parse("/dom/app1/sub"), key_pool[1].public)
    assert rec.carrier.name == Name.parse("/dom/app1/sub/key")
    assert crypto.verify_content(owner.keypair.public, rec.carrier)


def test_owner_cannot_cross_namespace(root, key_pool):
    owner = make_identity(root, Name.parse("/dom/app1"), key_pool[0])
    with pytest.raises(NotAuthorized):
        publish_key(owner, Name.parse("/dom/app2"), key_pool[1].public)


# --- ownership proofs ------------------------------------------------------


def test_one_hop_proof(root, key_pool):
    owner = make_identity(root, Name.parse("/dom/app1"), key_pool[0])
    nonce = b"\xaa" * 16
    proof = prove_ownership(owner, owner.namespace, nonce)
    result = verify_ownership(root.public, owner.namespace, nonce, proof)
    assert result.ok and result.reason is ProofReason.OK


def test_three_hop_delegation_chain(root, key_pool):
    a = make_identity(root, Name.parse("/dom/app1"), key_pool[0])
    b = make_identity(a, Name.parse("/dom/app1/floor2"), key_pool[1])
    c = make_identity(b, Name.parse("/dom/app1/floor2/desk"), key_pool[2])
    nonce = b"\xbb" * 16
    proof = prove_ownership(c, c.namespace, nonce)
    assert len(proof.path) == 3
    assert verify_ownership(root.public, c.namespace, nonce, proof).ok


def test_ancestor_key_covers_descendant(root, key_pool):
    owner = make_identity(root, Name.parse("/dom/app1"), key_pool[0])
    claimed = Name.parse("/dom/app1/room7")
    nonce = b"\xcc" * 16
    proof = prove_ownership(owner, claimed, nonce)
    assert verify_ownership(root.public, claimed, nonce, proof).ok


def test_no_usable_key(root, key_pool):
    owner = make_identity(root, Name.parse("/dom/app1"), key_pool[0])
    with pytest.raises(NoUsableKey):
        prove_ownership(owner, Name.parse("/dom/app2"), b"\xdd" * 16)


def test_prefix_violation_detected(root, key_pool):
    # Hand-build a path whose intermediate vertex escapes the parent namespace.
    a = make_identity(root, Name.parse("/dom/app1"), key_pool[0])
    stray_rec = publish_key(root, Name.parse("/other/app9"), key_pool[1].public)
    # Re-sign the stray record under a's key so only the prefix rule can catch it.
    forged = dataclasses.replace(stray_rec.carrier, signature=b"")
    forged = crypto.sign_content(a.keypair, forged)
    stray = trust.Identity(
        keypair=key_pool[1], chain=a.chain + (trust.KeyRecord.from_carrier(forged),)
    )
    nonce = b"\xee" * 16
    proof = prove_ownership(stray, Name.parse("/other/app9"), nonce)
    result = verify_ownership(root.public, Name.parse("/other/app9"), nonce, proof)
    assert not result.ok
    assert result.reason is ProofReason.PREFIX_VIOLATION


def test_nonce_must_match(root, key_pool):
    owner = make_identity(root, Name.parse("/dom/app1"), key_pool[0])
    proof = prove_ownership(owner, owner.namespace, b"\x01" * 16)
    result = verify_ownership(root.public, owner.namespace, b"\x02" * 16, proof)
    assert not result.ok


def test_challenger_rejects_nonce_reuse(root, key_pool):
    owner = make_identity(root, Name.parse("/dom/app1"), key_pool[0])
    chal = Challenger(root.public, rng=random.Random(5))
    nonce = chal.challenge(now_ms=0)
    proof = prove_ownership(owner, owner.namespace, nonce)
    assert chal.check(owner.namespace, proof, now_ms=100).ok
    assert not chal.check(owner.namespace, proof, now_ms=200).ok


def test_challenger_expires_nonces(root, key_pool):
    owner = make_identity(root, Name.parse("/dom/app1"), key_pool[0])
    chal = Challenger(root.public, rng=random.Random(6), ttl_ms=30_000)
    nonce = chal.challenge(now_ms=0)
    proof = prove_ownership(owner, owner.namespace, nonce)
    assert not chal.check(owner.namespace, proof, now_ms=31_000).ok


def _mutate_proof(proof, rng):
    """One single-field mutation of a valid proof: name, signature, nonce or ordering."""
    kind = rng.choice(["resp-name", "resp-sig", "nonce", "path-order", "path-sig", "path-payload"])
    if kind == "resp-name":
        new_name = proof.response.name[:-1].append(rng.randbytes(16))
        return dataclasses.replace(proof, response=dataclasses.replace(proof.response, name=new_name))
    if kind == "resp-sig":
        sig = bytearray(proof.response.signature)
        sig[rng.randrange(1, len(sig))] ^= 1 << rng.randrange(8)
        return dataclasses.replace(proof, response=dataclasses.replace(proof.response, signature=bytes(sig)))
    if kind == "nonce":
        return dataclasses.replace(proof, nonce=rng.randbytes(16))
    if kind == "path-order":
        if len(proof.path) < 2:
            return dataclasses.replace(proof, path=proof.path + proof.path)
        path = list(proof.path)
        i = rng.randrange(len(path) - 1)
        path[i], path[i + 1] = path[i + 1], path[i]
        return dataclasses.replace(proof, path=tuple(path))
    idx = rng.randrange(len(proof.path))
    carrier = proof.path[idx]
    if kind == "path-sig":
        sig = bytearray(carrier.signature)
        sig[rng.randrange(1, len(sig))] ^= 1 << rng.randrange(8)
        carrier = dataclasses.replace(carrier, signature=bytes(sig))
    else:
        payload = bytearray(carrier.payload)
        payload[rng.randrange(len(payload))] ^= 1 << rng.randrange(8)
        carrier = dataclasses.replace(carrier, payload=bytes(payload))
    path = list(proof.path)
    path[idx] = carrier
    return dataclasses.replace(proof, path=tuple(path))


def test_mutation_oracle_rejects_all(root, key_pool):
    rng = random.Random(35)
    a = make_identity(root, Name.parse("/dom/app1"), key_pool[0])
    b = make_identity(a, Name.parse("/dom/app1/x"), key_pool[1])
    nonce = b"\x77" * 16
    proof = prove_ownership(b, b.namespace, nonce)
    assert verify_ownership(root.public, b.namespace, nonce, proof).ok
    for _ in range(300):
        mutant = _mutate_proof(proof, rng)
        assert not verify_ownership(root.public, b.namespace, nonce, mutant).ok


def test_delegation_monotonicity(root, key_pool):
    # Any namespace provable by a delegated key descends from the delegator.
    rng = random.Random(99)
    for _ in range(25):
        depth = rng.randrange(1, 5)
        ns = Name.parse("/dom")
        ident = None
        for level in range(depth):
            ns = ns.append(f"n{rng.randrange(3)}".encode())
            ident = make_identity(ident or root, ns, rng.choice(key_pool))
        claimed = ns if rng.random() < 0.5 else ns.append(b"leaf")
        proof = prove_ownership(ident, claimed, b"\x10" * 16)
        assert verify_ownership(root.public, claimed, b"\x10" * 16, proof).ok
        for rec in ident.chain[1:]:
            parent_idx = ident.chain.index(rec) - 1
            assert ident.chain[parent_idx].namespace.is_prefix_of(rec.namespace)
        assert ident.namespace.is_prefix_of(claimed)


# --- attributes ------------------------------------------------------------

FULL_ATTRIBUTE_NAME = (
    "/ndn/uci/ics/432B/domain/lighting-domain-1/appname/light-board-1"
    "/access/full-access/expires/20151231235959Z/key"
)


def test_parse_attributes_full_name():
    attrs = parse_attributes(Name.parse(FULL_ATTRIBUTE_NAME))
    assert attrs.values(b"domain") == [b"lighting-domain-1"]
    assert attrs.values(b"appname") == [b"light-board-1"]
    assert attrs.values(b"access") == [b"full-access"]
    assert attrs.values(b"expires") == [b"20151231235959Z"]


def test_parse_attributes_none_recognized():
    assert not parse_attributes(Name.parse("/a/b/c"))
    assert not parse_attributes(Name.parse("/"))


def test_parse_attributes_dangling():
    with pytest.raises(DanglingAttributeName):
        parse_attributes(Name.parse("/x/access/full-access/expires/key"))


def test_parse_attributes_with_region_prefix():
    attrs = parse_attributes(
        Name.parse("/site/bld1/access/actuate/key"), region_prefix=Name.parse("/site/bld1")
    )
    assert attrs.values(b"access") == [b"actuate"]


def test_generalized_time_strictness():
    assert parse_generalized_time(b"20151231235959Z") == 1451606399.0
    for bad in (b"2015123123595Z", b"20151231235959", b"20151331235959Z", b"x" * 15):
        with pytest.raises(ValueError):
            parse_generalized_time(bad)


def test_repeated_expires_intersects_to_earlier():
    attrs = parse_attributes(Name.parse("/x/expires/20200101000000Z/expires/20150101000000Z/key"))
    # Interval-intersection oracle: [-inf, e1] ∩ [-inf, e2] = [-inf, min(e1, e2)].
    instants = [parse_generalized_time(v) for v in attrs.values(b"expires")]
    assert effective_expires(attrs) == min(instants)
    assert effective_expires(attrs) == parse_generalized_time(b"20150101000000Z")


def test_repeated_access_intersects_to_narrower():
    attrs = AttributeSet(((b"access", b"full-access"), (b"access", b"read-only")))
    assert effective_access(attrs) == trust.ACCESS_LEVELS[b"read-only"]


def test_absent_access_grants_nothing():
    # Fail closed: a key with no access attribute holds no actuation rights.
    assert effective_access(AttributeSet()) == 0
    assert effective_access(AttributeSet(((b"expires", b"20200101000000Z"),))) == 0


def test_intersection_only_shrinks():
    # Once an attribute is present, further instances never widen it.
    rng = random.Random(3)
    access_values = [b"full-access", b"actuate", b"read-only", b"bogus"]
    expire_values = [b"20100101000000Z", b"20200101000000Z", b"20300101000000Z"]
    for _ in range(200):
        pairs = [(b"access", rng.choice(access_values)), (b"expires", rng.choice(expire_values))]
        for _ in range(rng.randrange(0, 4)):
            if rng.random() < 0.5:
                pairs.append((b"access", rng.choice(access_values)))
            else:
                pairs.append((b"expires", rng.choice(expire_values)))
        base = AttributeSet(tuple(pairs))
        extra = (
            (b"access", rng.choice(access_values))
            if rng.random() < 0.5
            else (b"expires", rng.choice(expire_values))
        )
        extended = AttributeSet(base.pairs + (extra,))
        assert effective_access(extended) <= effective_access(base)
        assert effective_expires(extended) <= effective_expires(base)


# --- policy ----------------------------------------------------------------


def _attrs(access=b"full-access", expires=b"20151231235959Z"):
    return AttributeSet(((b"access", access), (b"expires", expires)))


NOW_2015 = parse_generalized_time(b"20150601000000Z")


def test_policy_allow_nominal():
    v = evaluate_policy(_attrs(), None, Name.parse("/dom/a"), b"on", NOW_2015, REGISTRY)
    assert v.allowed


def test_policy_denies_expired():
    v = evaluate_policy(
        _attrs(), None, Name.parse("/dom/a"), b"on", parse_generalized_time(b"20160101000000Z"), REGISTRY
    )
    assert not v.allowed and v.reason == "Expired"


def test_policy_truth_table():
    # 2x2x2: expired? x access-covers? x acl-permits?, against hand enumeration.
    app_ns = Name.parse("/dom/a")
    root = TrustRoot.create("/t")
    acl_yes = build_acl(root, Name.parse("/t/acl"), [("/dom", ["on"])])
    acl_no = build_acl(root, Name.parse("/t/acl2"), [("/dom", ["off"])])
    for expired in (False, True):
        for covers in (False, True):
            for acl_ok in (False, True):
                attrs = _attrs(access=b"full-access" if covers else b"read-only")
                now = parse_generalized_time(b"20160101000000Z") if expired else NOW_2015
                acl = acl_yes if acl_ok else acl_no
                v = evaluate_policy(attrs, acl, app_ns, b"on", now, REGISTRY)
                # Hand enumeration: allowed iff nothing denies; first failing
                # check names the reason (expiry, then access, then ACL).
                expect_allowed = (not expired) and covers and acl_ok
                assert v.allowed == expect_allowed
                if expired:
                    assert v.reason == "Expired"
                elif not covers:
                    assert v.reason == "PolicyDenied"
                elif not acl_ok:
                    assert v.reason == "AclDenied"


def test_policy_conflicting_domain_denies():
    attrs = AttributeSet(
        ((b"domain", b"d1"), (b"domain", b"d2"), (b"access", b"full-access"))
    )
    v = evaluate_policy(attrs, None, Name.parse("/x"), b"on", NOW_2015, REGISTRY)
    assert not v.allowed and v.reason == "PolicyDenied"


def test_policy_unknown_command_class_denies():
    v = evaluate_policy(_attrs(), None, Name.parse("/x"), b"explode", NOW_2015, REGISTRY)
    assert not v.allowed


def test_access_lattice_covers_read_only():
    attrs = AttributeSet(((b"access", b"actuate"),))
    assert evaluate_policy(attrs, None, Name.parse("/x"), b"status", NOW_2015, REGISTRY).allowed
    attrs_ro = AttributeSet(((b"access", b"read-only"),))
    assert not evaluate_policy(attrs_ro, None, Name.parse("/x"), b"on", NOW_2015, REGISTRY).allowed


# --- ACLs ------------------------------------------------------------------


def test_acl_round_trip_and_matching():
    root = TrustRoot.create("/t")
    acl = build_acl(root, Name.parse("/t/acl"), [("/dom/seq", ["on", "off", "intensity/*"])])
    loaded = load_acl(root.public, acl.carrier)
    assert loaded.entries == acl.entries
    assert acl_permits(loaded, Name.parse("/dom/seq/a"), b"on")
    assert acl_permits(loaded, Name.parse("/dom/seq"), b"intensity/+10")
    assert not acl_permits(loaded, Name.parse("/dom/other"), b"on")
    assert not acl_permits(loaded, Name.parse("/dom/seq"), b"strobe")


def test_acl_signature_checked():
    root = TrustRoot.create("/t")
    other = TrustRoot.create("/t2")
    acl = build_acl(root, Name.parse("/t/acl"), [("/dom", ["on"])])
    with pytest.raises(trust.TrustError):
        load_acl(other.public, acl.carrier)
