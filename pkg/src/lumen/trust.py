"""Namespace ownership: key records, delegation chains, proofs, attributes.

Public keys bind to namespaces through key-record content objects
published at ``<namespace>/key``.  A record is signed either by the
trust root or by the owner of an ancestor namespace, which yields a
certificate path; ownership of a namespace is demonstrated by answering
a fresh-nonce challenge with a content object that chains to the root
through such a path.  Key attributes (domain, appname, access, expires)
travel inside the namespace itself as consecutive name/value component
pairs; repeated attributes combine by intersection.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, field
from enum import Enum

from . import crypto
from .crypto import KeyPair, PublicKey, SchemeMismatch
from .names import Name
from .packets import ContentObject

KEY_COMPONENT = b"key"

RECOGNIZED_ATTRS = (b"domain", b"appname", b"access", b"expires")

# Fixed permission lattice: full-access > actuate > read-only.
ACCESS_LEVELS = {b"read-only": 1, b"actuate": 2, b"full-access": 3}

NONCE_LEN = 16
NONCE_TTL_MS = 30_000


class TrustError(Exception):
    pass


class NotAuthorized(TrustError):
    """Signer's namespace is not a prefix of the target namespace."""


class NoUsableKey(TrustError):
    """No held key covers the claimed namespace."""


class DanglingAttributeName(TrustError):
    """Attribute region ends with a name that has no value."""


@dataclass(frozen=True)
class TrustRoot:
    """The domain's root of trust; the signing half exists only at the AM."""

    name: Name
    keypair: KeyPair | None = None

    @property
    def public(self) -> PublicKey:
        if self.keypair is None:
            raise TrustError("verification-only root has no public key attached")
        return self.keypair.public

    def key_name(self) -> Name:
        return self.name.append(KEY_COMPONENT)

    @classmethod
    def create(cls, name: Name | str = "/trust/root", rng=None) -> "TrustRoot":
        if isinstance(name, str):
            name = Name.parse(name)
        return cls(name=name, keypair=crypto.generate_keypair(rng=rng))


@dataclass(frozen=True)
class KeyRecord:
    """A public key bound to a namespace by a signed carrier at <namespace>/key."""

    namespace: Name
    pk: PublicKey
    carrier: ContentObject

    @classmethod
    def from_carrier(cls, carrier: ContentObject) -> "KeyRecord":
        if len(carrier.name) == 0 or carrier.name[-1] != KEY_COMPONENT:
            raise TrustError(f"carrier name {carrier.name} does not end in /key")
        pk = crypto.deserialize_public(carrier.payload)
        return cls(namespace=carrier.name[:-1], pk=pk, carrier=carrier)


@dataclass(frozen=True)
class Identity:
    """A keypair together with its certificate path from the root."""

    keypair: KeyPair
    chain: tuple[KeyRecord, ...]  # root-signed record first, own record last

    @property
    def record(self) -> KeyRecord:
        return self.chain[-1]

    @property
    def namespace(self) -> Name:
        return self.record.namespace


def publish_key(signer: TrustRoot | Identity, namespace: Name, pk: PublicKey) -> KeyRecord:
    """Publish pk under namespace/key, signed by the root or an ancestor owner."""
    if isinstance(signer, TrustRoot):
        if signer.keypair is None:
            raise TrustError("root has no signing key here")
        signing_kp = signer.keypair
        locator = signer.key_name()
    else:
        if not signer.namespace.is_prefix_of(namespace):
            raise NotAuthorized(
                f"{signer.namespace} may not publish keys under {namespace}"
            )
        signing_kp = signer.keypair
        locator = signer.record.carrier.name
    carrier = ContentObject(
        name=namespace.append(KEY_COMPONENT),
        payload=crypto.serialize_public(pk),
        key_locator=locator,
    )
    carrier = crypto.sign_content(signing_kp, carrier)
    return KeyRecord(namespace=namespace, pk=pk, carrier=carrier)


def make_identity(signer: TrustRoot | Identity, namespace: Name, keypair: KeyPair | None = None) -> Identity:
    """Generate (or wrap) a keypair and publish it under namespace."""
    kp = keypair or crypto.generate_keypair()
    record = publish_key(signer, namespace, kp.public)
    parent_chain = () if isinstance(signer, TrustRoot) else signer.chain
    return Identity(keypair=kp, chain=parent_chain + (record,))


# --- Ownership proofs ------------------------------------------------------


@dataclass(frozen=True)
class OwnershipProof:
    nonce: bytes
    response: ContentObject
    path: tuple[ContentObject, ...]  # key-record carriers, root-signed first


class ProofReason(Enum):
    OK = "ok"
    EMPTY_PATH = "empty-path"
    BAD_CARRIER = "bad-carrier"
    ROOT_SIG_INVALID = "root-sig-invalid"
    CHAIN_SIG_INVALID = "chain-sig-invalid"
    PREFIX_VIOLATION = "prefix-violation"
    BAD_RESPONSE_NAME = "bad-response-name"
    NONCE_MISMATCH = "nonce-mismatch"
    RESPONSE_SIG_INVALID = "response-sig-invalid"


@dataclass(frozen=True)
class ProofResult:
    ok: bool
    reason: ProofReason

    def __bool__(self) -> bool:
        return self.ok


def prove_ownership(owner: Identity, namespace: Name, nonce: bytes) -> OwnershipProof:
    """Answer a challenge for namespace with a response chained to the root."""
    if not owner.namespace.is_prefix_of(namespace):
        raise NoUsableKey(f"{owner.namespace} does not cover {namespace}")
    response = ContentObject(
        name=namespace.append(nonce),
        key_locator=owner.record.carrier.name,
    )
    response = crypto.sign_content(owner.keypair, response)
    return OwnershipProof(
        nonce=nonce,
        response=response,
        path=tuple(r.carrier for r in owner.chain),
    )


def _safe_verify(pk: PublicKey, obj: ContentObject) -> bool:
    try:
        return crypto.verify_content(pk, obj)
    except SchemeMismatch:
        return False


def verify_ownership(pk_root: PublicKey, namespace: Name, nonce: bytes, proof: OwnershipProof) -> ProofResult:
    """Check signatures, prefix constraints, and challenge freshness.

    The path is valid when the first carrier verifies under the root key,
    every later carrier verifies under its predecessor's key with the
    predecessor's full namespace as a name prefix, and the response names
    exactly namespace/nonce and verifies under the last carrier's key.
    """

    def fail(reason):
        return ProofResult(False, reason)

    if not proof.path:
        return fail(ProofReason.EMPTY_PATH)
    try:
        records = [KeyRecord.from_carrier(c) for c in proof.path]
    except (TrustError, crypto.CryptoError):
        return fail(ProofReason.BAD_CARRIER)

    if not _safe_verify(pk_root, records[0].carrier):
        return fail(ProofReason.ROOT_SIG_INVALID)
    for prev, cur in zip(records, records[1:]):
        if not prev.namespace.is_prefix_of(cur.carrier.name):
            return fail(ProofReason.PREFIX_VIOLATION)
        if not _safe_verify(prev.pk, cur.carrier):
            return fail(ProofReason.CHAIN_SIG_INVALID)

    if proof.nonce != nonce:
        return fail(ProofReason.NONCE_MISMATCH)
    expected = namespace.append(nonce)
    if proof.response.name != expected:
        return fail(ProofReason.BAD_RESPONSE_NAME)
    last = records[-1]
    if not last.namespace.is_prefix_of(proof.response.name):
        return fail(ProofReason.PREFIX_VIOLATION)
    if not _safe_verify(last.pk, proof.response):
        return fail(ProofReason.RESPONSE_SIG_INVALID)
    return ProofResult(True, ProofReason.OK)


class Challenger:
    """Issues fresh nonces and enforces single use within a TTL."""

    def __init__(self, pk_root: PublicKey, rng=None, ttl_ms: int = NONCE_TTL_MS):
        self.pk_root = pk_root
        self.rng = rng
        self.ttl_ms = ttl_ms
        self._outstanding: dict[bytes, int] = {}  # nonce -> issue time (ms)

    def challenge(self, now_ms: int) -> bytes:
        if self.rng is None:
            import secrets

            nonce = secrets.token_bytes(NONCE_LEN)
        else:
            nonce = self.rng.randbytes(NONCE_LEN)
        self._outstanding[nonce] = now_ms
        return nonce

    def check(self, namespace: Name, proof: OwnershipProof, now_ms: int) -> ProofResult:
        issued = self._outstanding.get(proof.nonce)
        if issued is None or now_ms - issued > self.ttl_ms:
            self._outstanding.pop(proof.nonce, None)
            return ProofResult(False, ProofReason.NONCE_MISMATCH)
        del self._outstanding[proof.nonce]  # single use
        return verify_ownership(self.pk_root, namespace, proof.nonce, proof)


class KeyDirectory:
    """Published key records by namespace; flags multiplicity on lookup."""

    def __init__(self):
        self._records: dict[Name, list[KeyRecord]] = {}

    def add(self, record: KeyRecord) -> None:
        self._records.setdefault(record.namespace, []).append(record)

    def lookup(self, namespace: Name) -> tuple[KeyRecord | None, bool]:
        recs = self._records.get(namespace, [])
        if not recs:
            return None, False
        return recs[0], len(recs) > 1


# --- Key attributes --------------------------------------------------------


@dataclass(frozen=True)
class AttributeSet:
    """Name/value pairs extracted from a namespace, in name order."""

    pairs: tuple[tuple[bytes, bytes], ...] = ()

    def values(self, attr: bytes) -> list[bytes]:
        return [v for k, v in self.pairs if k == attr]

    def __bool__(self) -> bool:
        return bool(self.pairs)


def parse_attributes(namespace: Name, region_prefix: Name | None = None) -> AttributeSet:
    """Extract attribute pairs from a namespace.

    The attribute region runs from the end of region_prefix (or, when not
    given, from the first recognized attribute name) to the trailing
    /key component if present.  Pairs are kept in order; repeated names
    stay repeated for later intersection.
    """
    comps = list(namespace.components)
    if comps and comps[-1] == KEY_COMPONENT:
        comps = comps[:-1]
    if region_prefix is not None:
        if not region_prefix.is_prefix_of(Name(comps)):
            return AttributeSet()
        region = comps[len(region_prefix) :]
    else:
        start = next((i for i, c in enumerate(comps) if c in RECOGNIZED_ATTRS), None)
        if start is None:
            return AttributeSet()
        region = comps[start:]
    if len(region) % 2 != 0:
        raise DanglingAttributeName(f"unpaired attribute name {region[-1]!r}")
    pairs = tuple((region[i], region[i + 1]) for i in range(0, len(region), 2))
    return AttributeSet(pairs)


def parse_generalized_time(value: bytes) -> float:
    """Strict 15-char YYYYMMDDHHMMSSZ to epoch seconds (UTC)."""
    s = value.decode("ascii", errors="strict")
    if len(s) != 15 or not s.endswith("Z"):
        raise ValueError(f"not generalized time: {value!r}")
    dt = datetime.datetime.strptime(s[:-1], "%Y%m%d%H%M%S")
    return dt.replace(tzinfo=datetime.timezone.utc).timestamp()


def effective_expires(attrs: AttributeSet) -> float | None:
    """Intersection of validity intervals: the earliest expiry instant."""
    values = attrs.values(b"expires")
    if not values:
        return None
    return min(parse_generalized_time(v) for v in values)


def effective_access(attrs: AttributeSet) -> int:
    """Intersection over the access lattice: the minimum granted level."""
    values = attrs.values(b"access")
    if not values:
        return 0
    return min(ACCESS_LEVELS.get(v, 0) for v in values)


def _consistent(attrs: AttributeSet, attr: bytes) -> bool:
    vals = attrs.values(attr)
    return len(set(vals)) <= 1


# --- Access control lists --------------------------------------------------


@dataclass(frozen=True)
class Acl:
    """AM-signed list of (application prefix, permitted command patterns)."""

    name: Name
    entries: tuple[tuple[Name, tuple[str, ...]], ...]
    carrier: ContentObject = field(repr=False, default=None)


def build_acl(root: TrustRoot, name: Name, entries) -> Acl:
    norm = tuple((p if isinstance(p, Name) else Name.parse(p), tuple(cmds)) for p, cmds in entries)
    payload = json.dumps(
        {"v": 1, "entries": [{"prefix": p.uri(), "commands": list(cmds)} for p, cmds in norm]},
        sort_keys=True,
    ).encode()
    carrier = ContentObject(name=name, payload=payload, key_locator=root.key_name())
    carrier = crypto.sign_content(root.keypair, carrier)
    return Acl(name=name, entries=norm, carrier=carrier)


def load_acl(pk_root: PublicKey, carrier: ContentObject) -> Acl:
    if not crypto.verify_content(pk_root, carrier):
        raise TrustError("ACL signature does not verify under the root key")
    doc = json.loads(carrier.payload)
    entries = tuple(
        (Name.parse(e["prefix"]), tuple(e["commands"])) for e in doc["entries"]
    )
    return Acl(name=carrier.name, entries=entries, carrier=carrier)


def command_matches(pattern: str, cmd: bytes) -> bool:
    """Exact byte match, or prefix match for patterns ending in '*'."""
    pat = pattern.encode("latin-1")
    if pat.endswith(b"*"):
        return cmd.startswith(pat[:-1])
    return cmd == pat


def acl_permits(acl: Acl, app_ns: Name, cmd: bytes) -> bool:
    for prefix, patterns in acl.entries:
        if prefix.is_prefix_of(app_ns) and any(command_matches(p, cmd) for p in patterns):
            return True
    return False


# --- Policy evaluation -----------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    allowed: bool
    reason: str = ""
    detail: str = ""

    def __bool__(self) -> bool:
        return self.allowed


ALLOW = Verdict(True)


def evaluate_policy(
    attrs: AttributeSet,
    acl: Acl | None,
    app_ns: Name,
    cmd: bytes,
    now: float,
    registry=None,
    domain: bytes | None = None,
) -> Verdict:
    """Decide whether a command is permitted under the key's attributes.

    Expiry is checked against the earliest expires instant; repeated
    domain/appname values must agree; the access level must cover the
    command's permission class (resolved through the registry); a
    configured ACL must additionally permit.  now is epoch seconds.
    """
    try:
        expiry = effective_expires(attrs)
    except ValueError:
        return Verdict(False, "Expired", "unparsable expires attribute")
    if expiry is not None and now > expiry:
        return Verdict(False, "Expired", f"expired at {expiry}")

    for attr in (b"domain", b"appname"):
        if not _consistent(attrs, attr):
            return Verdict(False, "PolicyDenied", f"conflicting {attr.decode()} values")
    if domain is not None:
        vals = attrs.values(b"domain")
        if vals and vals[0] != domain:
            return Verdict(False, "PolicyDenied", "wrong domain")

    if registry is not None:
        cmd_class = registry.class_of(cmd)
        if cmd_class is None:
            return Verdict(False, "PolicyDenied", "command has no permission class")
        required = ACCESS_LEVELS[cmd_class]
    else:
        required = ACCESS_LEVELS[b"actuate"]
    if effective_access(attrs) < required:
        return Verdict(False, "PolicyDenied", "access level does not cover command")

    if acl is not None and not acl_permits(acl, app_ns, cmd):
        return Verdict(False, "AclDenied", "no ACL entry permits this command")
    return ALLOW
