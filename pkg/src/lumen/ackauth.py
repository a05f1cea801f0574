"""Acknowledgment authentication: signatures, MACs, challenges, hash chains.

A fixture's ack must be checkable at two places: by the commanding
application (which holds keys) and, for the publicly verifiable
schemes, by routers along the return path (which hold none).  The
encrypted-challenge scheme plants a hash of a per-command secret in
the command token; the hash-chain scheme plants the previously
verified link.  Either way a router needs one hash invocation and no
key material to discard a forged ack.
"""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass

from . import crypto
from .control import ACK_CHAIN, ACK_ENC, ACK_MAC, ACK_SIG, AuthToken
from .crypto import KeyPair, PublicKey
from .names import Name
from .packets import ContentObject, encode_name

ACK_DOMAIN = b"lumen-ack-v1"

CHAIN_LEN = 10_000
PEBBLE_SPACING = 100

CHALLENGE_LEN = 16


class AckError(Exception):
    pass


class ChainExhausted(AckError):
    pass


# --- Encrypted challenges ---------------------------------------------------


def enc_challenge_new(k_app: bytes, rng=None) -> tuple[bytes, bytes]:
    """Pick x; return (x, token params y+z) with y = E(x) and z = H(x).

    Only the fixture can open y; anyone can check a revealed x against z.
    """
    x = rng.randbytes(CHALLENGE_LEN) if rng is not None else secrets.token_bytes(CHALLENGE_LEN)
    y = crypto.aes_block_encrypt(k_app[:16], x)
    z = crypto.sha256(x)
    return x, y + z


def enc_challenge_open(k_app: bytes, params: bytes) -> bytes:
    """Fixture side: recover x and insist the advertised hash matches it."""
    if len(params) != CHALLENGE_LEN + 32:
        raise AckError("challenge parameters must be y(16) + z(32)")
    x = crypto.aes_block_decrypt(k_app[:16], params[:CHALLENGE_LEN])
    if crypto.sha256(x) != params[CHALLENGE_LEN:]:
        raise AckError("challenge hash does not match its ciphertext")
    return x


# --- Hash chains ------------------------------------------------------------


class HashChain:
    """Seed side of a chain; answers lock-step command indexes.

    Pebbles are the stored intermediate links, one every ``spacing``
    steps, so revealing any link costs at most spacing-1 hashes from
    the nearest pebble below it.  ``spacing == length`` degenerates to
    keeping only the seed, which is what the pebbled form is measured
    against.
    """

    def __init__(self, seed: bytes, length: int = CHAIN_LEN, spacing: int = PEBBLE_SPACING):
        if length <= 0 or spacing <= 0 or length % spacing != 0:
            raise AckError("spacing must evenly divide a positive length")
        self.length = length
        self.spacing = spacing
        self.hash_count = 0  # hashes spent answering (setup excluded)
        self.setup_hash_count = length
        pebbles = [seed]
        v = seed
        for i in range(1, length + 1):
            v = crypto.sha256(v)
            if i % spacing == 0:
                pebbles.append(v)
        self._pebbles = pebbles
        self.answered = 0
        self._last: bytes | None = None

    @property
    def anchor(self) -> bytes:
        return self._pebbles[-1]

    def value_at(self, t: int) -> bytes:
        """H^t(seed), walked forward from the nearest stored pebble."""
        if not 0 <= t <= self.length:
            raise AckError(f"link index {t} outside chain")
        j = t // self.spacing
        v = self._pebbles[j]
        for _ in range(t - j * self.spacing):
            v = crypto.sha256(v)
            self.hash_count += 1
        return v

    def answer(self, k: int) -> bytes:
        """Reveal the link for command k; repeat answers come from cache."""
        if k == self.answered and self._last is not None:
            return self._last
        if k != self.answered + 1:
            raise AckError(f"chain is lock-step: expected {self.answered + 1}, got {k}")
        if k > self.length:
            raise ChainExhausted(f"chain of length {self.length} is spent")
        w = self.value_at(self.length - k)
        self.answered = k
        self._last = w
        return w


class ChainVerifier:
    """Anchor side of a chain; one hash accepts or rejects each revealed link."""

    def __init__(self, anchor: bytes, length: int = CHAIN_LEN):
        self.expect = anchor
        self.length = length
        self.index = 0
        self._last: bytes | None = None
        self.hash_count = 0

    def check_value(self) -> bytes:
        """What the next revealed link must hash to; rides in the token."""
        return self.expect

    def accept(self, k: int, w: bytes) -> bool:
        if k == self.index:
            return self._last is not None and crypto.bytes_eq(w, self._last)
        if k != self.index + 1 or k > self.length:
            return False
        self.hash_count += 1
        if crypto.sha256(w) != self.expect:
            return False
        self.expect = w
        self.index = k
        self._last = w
        return True

    def resync(self, k: int, w: bytes) -> bool:
        """Catch up to a link revealed out of band (e.g. in a signed ack).

        Verifiable forward: hashing w (k - index) times must land on the
        current expectation.
        """
        steps = k - self.index
        if steps < 0 or k > self.length:
            return False
        v = w
        for _ in range(steps):
            v = crypto.sha256(v)
            self.hash_count += 1
        if v != self.expect:
            return False
        self.expect = w
        self.index = k
        self._last = w
        return True


ANCHOR_COMPONENT = b"chain-anchor"


def make_anchor_cert(
    kp_fix: KeyPair,
    name_fix: Name,
    chain: HashChain,
    gen: int = 1,
    timestamp_ms: int = 0,
    scope: bytes | None = None,
) -> ContentObject:
    """Signed statement of (anchor, length, generation) for one chain.

    scope, when given, is an opaque component distinguishing chains the
    fixture keeps per counterparty.
    """
    name = name_fix.append(ANCHOR_COMPONENT)
    if scope:
        name = name.append(scope)
    name = name.append(gen.to_bytes(4, "big"))
    payload = chain.anchor + chain.length.to_bytes(4, "big") + gen.to_bytes(4, "big")
    obj = ContentObject(
        name=name, payload=payload, key_locator=name_fix.append(b"key"), timestamp_ms=timestamp_ms
    )
    return crypto.sign_content(kp_fix, obj)


def load_anchor_cert(pk_fix: PublicKey, cert: ContentObject) -> tuple[bytes, int, int]:
    if len(cert.payload) != 40:
        raise AckError("anchor certificate payload must be anchor(32)+length(4)+gen(4)")
    try:
        ok = crypto.verify_content(pk_fix, cert)
    except crypto.CryptoError:
        ok = False
    if not ok:
        raise AckError("anchor certificate signature does not verify")
    anchor = cert.payload[:32]
    length = int.from_bytes(cert.payload[32:36], "big")
    gen = int.from_bytes(cert.payload[36:40], "big")
    return anchor, length, gen


# --- Ack content objects ----------------------------------------------------


@dataclass(frozen=True)
class AckView:
    scheme: int
    status: bytes
    mac: bytes = b""
    x: bytes = b""
    chain_index: int = 0
    chain_value: bytes = b""

    def status_dict(self) -> dict:
        return json.loads(self.status)


def _status_bytes(status) -> bytes:
    if isinstance(status, (bytes, bytearray)):
        return bytes(status)
    return json.dumps(status, sort_keys=True).encode()


def _mac_input(name: Name, *fields: bytes) -> bytes:
    return ACK_DOMAIN + encode_name(name) + b"".join(fields)


def build_ack(
    name: Name,
    scheme: int,
    status,
    *,
    kp_fix: KeyPair | None = None,
    key_name: Name | None = None,
    k_app: bytes | None = None,
    x: bytes = b"",
    chain_index: int = 0,
    chain_value: bytes = b"",
    timestamp_ms: int = 0,
) -> ContentObject:
    """The ack satisfies the command interest, so it reuses the command name."""
    body = _status_bytes(status)
    if scheme == ACK_SIG:
        if kp_fix is None:
            raise AckError("signature acks need the fixture keypair")
        obj = ContentObject(
            name=name,
            payload=bytes([ACK_SIG]) + body,
            key_locator=key_name or Name(()),
            timestamp_ms=timestamp_ms,
        )
        return crypto.sign_content(kp_fix, obj)
    if k_app is None:
        raise AckError("keyed acks need k_app")
    if scheme == ACK_MAC:
        tag = crypto.mac(k_app, _mac_input(name, body))
        payload = bytes([ACK_MAC]) + tag + body
    elif scheme == ACK_ENC:
        if len(x) != CHALLENGE_LEN:
            raise AckError("enc ack needs the 16-byte recovered challenge")
        tag = crypto.mac(k_app, _mac_input(name, x, body))
        payload = bytes([ACK_ENC]) + x + tag + body
    elif scheme == ACK_CHAIN:
        if len(chain_value) != 32:
            raise AckError("chain ack needs a 32-byte revealed link")
        k4 = chain_index.to_bytes(4, "big")
        tag = crypto.mac(k_app, _mac_input(name, k4, chain_value, body))
        payload = bytes([ACK_CHAIN]) + k4 + chain_value + tag + body
    else:
        raise AckError(f"unknown ack scheme 0x{scheme:02x}")
    return ContentObject(name=name, payload=payload, timestamp_ms=timestamp_ms)


def parse_ack(obj: ContentObject) -> AckView:
    p = obj.payload
    if not p:
        raise AckError("empty ack payload")
    scheme = p[0]
    if scheme == ACK_SIG:
        return AckView(scheme=ACK_SIG, status=p[1:])
    if scheme == ACK_MAC:
        if len(p) < 1 + 32:
            raise AckError("short MAC ack")
        return AckView(scheme=ACK_MAC, mac=p[1:33], status=p[33:])
    if scheme == ACK_ENC:
        if len(p) < 1 + CHALLENGE_LEN + 32:
            raise AckError("short challenge ack")
        return AckView(
            scheme=ACK_ENC,
            x=p[1 : 1 + CHALLENGE_LEN],
            mac=p[1 + CHALLENGE_LEN : 1 + CHALLENGE_LEN + 32],
            status=p[1 + CHALLENGE_LEN + 32 :],
        )
    if scheme == ACK_CHAIN:
        if len(p) < 1 + 4 + 32 + 32:
            raise AckError("short chain ack")
        return AckView(
            scheme=ACK_CHAIN,
            chain_index=int.from_bytes(p[1:5], "big"),
            chain_value=p[5:37],
            mac=p[37:69],
            status=p[69:],
        )
    raise AckError(f"unknown ack scheme 0x{scheme:02x}")


def verify_ack(
    obj: ContentObject,
    *,
    k_app: bytes | None = None,
    pk_fix: PublicKey | None = None,
    expected_x: bytes | None = None,
    chain: ChainVerifier | None = None,
) -> bool:
    """Application-side check of an ack, whatever its scheme."""
    try:
        view = parse_ack(obj)
    except AckError:
        return False
    if view.scheme == ACK_SIG:
        if pk_fix is None:
            return False
        try:
            return crypto.verify_content(pk_fix, obj)
        except crypto.CryptoError:
            return False
    if k_app is None:
        return False
    if view.scheme == ACK_MAC:
        return crypto.mac_verify(k_app, _mac_input(obj.name, view.status), view.mac)
    if view.scheme == ACK_ENC:
        if not crypto.mac_verify(k_app, _mac_input(obj.name, view.x, view.status), view.mac):
            return False
        return expected_x is None or crypto.bytes_eq(view.x, expected_x)
    if view.scheme == ACK_CHAIN:
        k4 = view.chain_index.to_bytes(4, "big")
        if not crypto.mac_verify(
            k_app, _mac_input(obj.name, k4, view.chain_value, view.status), view.mac
        ):
            return False
        return chain is None or chain.accept(view.chain_index, view.chain_value)
    return False


def router_ack_acceptable(token: AuthToken, obj: ContentObject) -> bool:
    """Keyless in-path check a router applies before satisfying the interest.

    Signature acks pass (they are the fallback and routers hold no
    keys to judge them); for the publicly verifiable schemes the ack
    must open the commitment carried in the token; a keyed-MAC ack is
    only acceptable where the token asked for one.
    """
    try:
        view = parse_ack(obj)
    except AckError:
        return False
    if view.scheme == ACK_SIG:
        return True
    if view.scheme != token.ack_scheme:
        return False
    if view.scheme == ACK_ENC:
        z = token.ack_params[CHALLENGE_LEN:]
        return crypto.sha256(view.x) == z
    if view.scheme == ACK_CHAIN:
        return crypto.sha256(view.chain_value) == token.ack_params
    return True  # MAC-for-MAC: nothing a keyless router can add
