"""The actors of a lighting domain, wired onto simulation hosts.

Two managers exist per domain.  The configuration manager pairs with
fresh fixtures over the out-of-band bootstrap transcript and remembers
each fixture key.  The authorization manager owns the trust root,
publishes key records, signs the ACL, and mints per-application keys
by running the fixture-key PRF over the application's attribute name.

FixtureActor and AppActor put protocol state behind network faces:
command verification, ack construction, chain sessions, retransmission
with fresh nonces, and the signed-ack fallback that both recovers from
loss and refills an exhausted chain in band.

BaselineApp and the fixture's baseline mode implement the legacy
pull exchange (announce, fetch, command content, ack): four messages
per command, nothing verified.  It exists for comparison runs only.
"""

from __future__ import annotations

import collections
import json
from dataclasses import dataclass, field

from . import ackauth, control, crypto
from .ackauth import (
    ANCHOR_COMPONENT,
    AckError,
    ChainExhausted,
    ChainVerifier,
    HashChain,
    build_ack,
    enc_challenge_new,
    enc_challenge_open,
    load_anchor_cert,
    make_anchor_cert,
    parse_ack,
    verify_ack,
)
from .control import (
    ACK_CHAIN,
    ACK_ENC,
    ACK_MAC,
    ACK_SIG,
    FixtureState,
    build_command,
    derive_app_key,
)
from .crypto import KeyPair, PublicKey
from .names import Name
from .netsim import Host, Sim
from .packets import ContentObject, Interest, encode_name
from .trust import Acl, KeyDirectory, KeyRecord, TrustRoot, build_acl, publish_key

MAX_RETRANSMITS = 2
DEFAULT_RTT_GUESS_MS = 50

PENDING_COMPONENT = b"pending"
CMD_COMPONENT = b"cmd"


class AuthManager:
    """Holds the trust root; publishes keys, signs ACLs, mints app keys."""

    def __init__(self, root: TrustRoot | None = None):
        self.root = root or TrustRoot.create()
        self.directory = KeyDirectory()

    def publish(self, namespace: Name, pk: PublicKey) -> KeyRecord:
        record = publish_key(self.root, namespace, pk)
        self.directory.add(record)
        return record

    def resolve(self, namespace: Name) -> KeyRecord | None:
        record, _ = self.directory.lookup(namespace)
        return record

    def sign_acl(self, name: Name, entries) -> Acl:
        return build_acl(self.root, name, entries)

    def app_key_for(self, cm: "ConfigManager", name_app: Name, name_fix: Name) -> bytes:
        return derive_app_key(cm.fixture_key(name_fix), name_app)


class ConfigManager:
    """Pairs fixtures into the domain and keeps their keys."""

    def __init__(self, rng):
        self.rng = rng
        self._keys: dict[Name, bytes] = {}

    def pair_fixture(
        self, state: FixtureState, name_fix: Name, domain: bytes, pk_root: PublicKey
    ) -> bytes:
        """Run the bootstrap transcript directly (configuration is off-path)."""
        pairing_key = self.rng.randbytes(16)
        k_fix = self.rng.randbytes(32)
        offer = control.make_bootstrap_offer(pairing_key, name_fix, domain, k_fix, pk_root)
        accept = state.bootstrap(offer, pairing_key)
        if not control.confirm_bootstrap(offer, accept, pairing_key):
            raise control.CommandError("fixture did not confirm pairing")
        self._keys[name_fix] = k_fix
        return k_fix

    def fixture_key(self, name_fix: Name) -> bytes:
        return self._keys[name_fix]


@dataclass
class ChainSession:
    chain: HashChain
    gen: int = 1


class FixtureActor:
    """Network face of one fixture: verifies commands, emits acks.

    Denied commands are dropped, not answered; amplifying garbage with
    signed errors would hand an attacker free signatures.  Repeats of
    an already-acked command name get the cached ack back unchanged.
    """

    def __init__(
        self,
        sim: Sim,
        host: Host,
        state: FixtureState,
        keypair: KeyPair,
        record: KeyRecord,
        baseline: bool = False,
        chain_len: int = ackauth.CHAIN_LEN,
        chain_spacing: int = ackauth.PEBBLE_SPACING,
        ack_cache_size: int = 8,
    ):
        self.sim = sim
        self.host = host
        self.state = state
        self.keypair = keypair
        self.record = record
        self.baseline = baseline
        self.chain_len = chain_len
        self.chain_spacing = chain_spacing
        self.sessions: dict[bytes, ChainSession] = {}
        self.ack_cache: collections.OrderedDict[Name, ContentObject] = collections.OrderedDict()
        self.ack_cache_size = ack_cache_size
        self.denials: collections.Counter = collections.Counter()
        self.executed = 0
        self.rng = sim.node_rng(host.name)
        self._fetching: dict[tuple[Name, int], tuple[int, Name]] = {}
        host.interest_handler = self._on_interest
        if baseline:
            host.content_handler = self._on_fetched_command

    @property
    def name(self) -> Name:
        return self.state.name

    def key_name(self) -> Name:
        return self.name.append(b"key")

    # -- chain sessions --

    def _session(self, scope: bytes, gen: int | None = None) -> ChainSession:
        sess = self.sessions.get(scope)
        want = gen if gen is not None else (sess.gen if sess else 1)
        if sess is None or want > sess.gen:
            seed = self.sim.node_rng(
                f"{self.host.name}|chain|{scope.hex()}|{want}"
            ).randbytes(32)
            sess = ChainSession(
                chain=HashChain(seed, length=self.chain_len, spacing=self.chain_spacing),
                gen=want,
            )
            self.sessions[scope] = sess
        return sess

    def _refill_session(self, scope: bytes) -> ChainSession:
        return self._session(scope, gen=self.sessions[scope].gen + 1)

    # -- interest dispatch --

    def _on_interest(self, host: Host, face: int, interest: Interest) -> None:
        name = interest.name
        if self.baseline:
            self._on_announcement(face, name)
            return
        if name == self.key_name():
            host.send(face, self.record.carrier)
            return
        anchor_prefix = self.name.append(ANCHOR_COMPONENT)
        if anchor_prefix.is_prefix_of(name):
            self._serve_anchor(face, name)
            return
        self._command(face, name)

    def _serve_anchor(self, face: int, name: Name) -> None:
        rest = name.components[len(self.name) + 1 :]
        if len(rest) != 2 or len(rest[1]) != 4:
            return
        scope, gen = rest[0], int.from_bytes(rest[1], "big")
        sess = self._session(scope)
        if gen != sess.gen:
            return  # stale or future generation; the fallback path handles it
        cert = make_anchor_cert(
            self.keypair, self.name, sess.chain, gen=sess.gen,
            timestamp_ms=self.sim.now_ms, scope=scope,
        )
        self.host.send(face, cert)

    # -- legacy pull exchange --

    def _on_announcement(self, face: int, name: Name) -> None:
        """Leg 1 of 4: an application says a command is waiting; go fetch it."""
        rest = name.components[len(self.name) :]
        if len(rest) != 3 or rest[0] != PENDING_COMPONENT or len(rest[2]) != 8:
            return
        try:
            app = Name.parse(rest[1].decode())
        except Exception:
            return
        seq = int.from_bytes(rest[2], "big")
        self._fetching[(app, seq)] = (face, name)
        fetch = app.append(CMD_COMPONENT).append(rest[2])
        self.host.send(face, Interest.fresh(fetch, rng=self.rng))

    def _on_fetched_command(self, host: Host, face: int, obj: ContentObject) -> None:
        """Legs 3 and 4: the command arrives as plain content; run it, ack it."""
        if len(obj.name) < 3 or obj.name[-2] != CMD_COMPONENT:
            return
        key = (obj.name[:-2], int.from_bytes(obj.name[-1], "big"))
        waiting = self._fetching.pop(key, None)
        if waiting is None:
            return
        aface, announcement = waiting
        try:
            status = self.state.apply_raw(obj.payload)
        except ValueError:
            return
        self.executed += 1
        ack = ContentObject(
            name=announcement, payload=json.dumps(status).encode(), timestamp_ms=self.sim.now_ms
        )
        self.host.send(aface, ack)

    def _command(self, face: int, name: Name) -> None:
        cached = self.ack_cache.get(name)
        if cached is not None:
            self.host.send(face, cached)
            return
        res = self.state.verify_command(name, self.sim.now_ms)
        if not res.ok:
            self.denials[res.reason] += 1
            return
        self.executed += 1
        ack = self._make_ack(name, res)
        if ack is None:
            return
        self.ack_cache[name] = ack
        while len(self.ack_cache) > self.ack_cache_size:
            self.ack_cache.popitem(last=False)
        self.host.send(face, ack)

    def _make_ack(self, name: Name, res: control.CommandResult) -> ContentObject | None:
        k_app = self.state.app_key(res.name_app)
        scheme = res.token.ack_scheme
        status = {"ok": True, "light": res.status}
        now = self.sim.now_ms
        if scheme == ACK_SIG:
            scope = encode_name(res.name_app)
            sess = self.sessions.get(scope)
            if sess is not None and sess.chain.answered:
                # Help a lagging verifier catch up from a trusted statement.
                status["chain_index"] = sess.chain.answered
                status["chain_value"] = sess.chain.answer(sess.chain.answered).hex()
                status["chain_gen"] = sess.gen
            return build_ack(
                name, ACK_SIG, status, kp_fix=self.keypair, key_name=self.key_name(), timestamp_ms=now
            )
        if scheme == ACK_MAC:
            return build_ack(name, ACK_MAC, status, k_app=k_app, timestamp_ms=now)
        if scheme == ACK_ENC:
            try:
                x = enc_challenge_open(k_app, res.token.ack_params)
            except AckError:
                self.denials["BadChallenge"] += 1
                return None
            return build_ack(name, ACK_ENC, status, k_app=k_app, x=x, timestamp_ms=now)
        # chain scheme
        scope = encode_name(res.name_app)
        sess = self._session(scope)
        try:
            k = sess.chain.answered + 1
            w = sess.chain.answer(k)
        except ChainExhausted:
            sess = self._refill_session(scope)
            status["chain_gen"] = sess.gen
            status["chain_anchor"] = sess.chain.anchor.hex()
            status["chain_len"] = sess.chain.length
            return build_ack(
                name, ACK_SIG, status, kp_fix=self.keypair, key_name=self.key_name(), timestamp_ms=now
            )
        return build_ack(
            name, ACK_CHAIN, status, k_app=k_app, chain_index=k, chain_value=w, timestamp_ms=now
        )


@dataclass
class Pending:
    fixture: Name
    verb: bytes
    scheme: int
    seq: int
    x: bytes | None = None
    first_sent: int = 0
    last_sent: int = 0
    xmit: int = 1


@dataclass
class Outcome:
    time_ms: int
    fixture: Name
    verb: bytes
    ok: bool
    scheme: int
    detail: str = ""
    latency_ms: int = 0  # from first transmission to resolution


class AppActor:
    """Network face of one application.

    Commands queue per fixture; chain-scheme traffic is lock-step (one
    in flight), other schemes pipeline freely.  Missing prerequisites
    (the fixture's public key, a chain anchor) are fetched on demand
    and the queue waits for them.
    """

    def __init__(
        self,
        sim: Sim,
        host: Host,
        name_app: Name,
        *,
        pk_root: PublicKey,
        app_keys: dict[Name, bytes] | None = None,
        keypair: KeyPair | None = None,
        fixture_pks: dict[Name, PublicKey] | None = None,
        scheme: int = ACK_MAC,
        rtt_guess_ms: int = DEFAULT_RTT_GUESS_MS,
        fallback: bool = True,
    ):
        self.sim = sim
        self.host = host
        self.name_app = name_app
        self.pk_root = pk_root
        self.app_keys = dict(app_keys or {})
        self.keypair = keypair
        self.fixture_pks = dict(fixture_pks or {})
        self.default_scheme = scheme
        self.fallback = fallback
        self.rng = sim.node_rng(host.name)
        self.rtt: dict[Name, int] = {}
        self.rtt_guess_ms = rtt_guess_ms
        self.seq = 0
        self.pending: dict[Name, Pending] = {}
        self.queue: dict[Name, collections.deque] = {}
        self.verifiers: dict[Name, ChainVerifier] = {}
        self.chain_gen: dict[Name, int] = {}
        self.awaiting_key: set[Name] = set()
        self.awaiting_anchor: set[Name] = set()
        self.stats: collections.Counter = collections.Counter()
        self.history: list[Outcome] = []
        host.content_handler = self._on_content

    # -- public API --

    def send_command(self, name_fix: Name, verb: bytes, scheme: int | None = None) -> None:
        self.queue.setdefault(name_fix, collections.deque()).append(
            (verb, self.default_scheme if scheme is None else scheme)
        )
        self._pump(name_fix)

    # -- queue management --

    def _chain_inflight(self, fix: Name) -> bool:
        return any(p.scheme == ACK_CHAIN for p in self.pending.values() if p.fixture == fix)

    def _pump(self, fix: Name) -> None:
        q = self.queue.get(fix)
        while q:
            verb, scheme = q[0]
            if scheme in (ACK_SIG, ACK_CHAIN) and fix not in self.fixture_pks:
                self._fetch_key(fix)
                return
            if scheme == ACK_CHAIN:
                if fix not in self.verifiers:
                    self._fetch_anchor(fix)
                    return
                if self._chain_inflight(fix):
                    return
            q.popleft()
            self._dispatch(fix, verb, scheme)

    def _fetch_key(self, fix: Name) -> None:
        if fix in self.awaiting_key:
            return
        self.awaiting_key.add(fix)
        self._express(fix.append(b"key"))

    def _fetch_anchor(self, fix: Name) -> None:
        if fix in self.awaiting_anchor:
            return
        self.awaiting_anchor.add(fix)
        gen = self.chain_gen.setdefault(fix, 1)
        name = (
            fix.append(ANCHOR_COMPONENT)
            .append(encode_name(self.name_app))
            .append(gen.to_bytes(4, "big"))
        )
        self._express(name)

    def _express(self, name: Name) -> None:
        self.host.send(0, Interest.fresh(name, rng=self.rng))

    # -- sending commands --

    def _k_app(self, fix: Name) -> bytes | None:
        return self.app_keys.get(fix)

    def _dispatch(self, fix: Name, verb: bytes, scheme: int) -> None:
        self.seq += 1
        now = self.sim.now_ms
        rtt = self.rtt.get(fix, self.rtt_guess_ms)
        params, x = b"", None
        k_app = self._k_app(fix)
        if scheme == ACK_ENC:
            x, params = enc_challenge_new(k_app, self.rng)
        elif scheme == ACK_CHAIN:
            params = self.verifiers[fix].check_value()
        name = build_command(
            fix,
            self.name_app,
            verb,
            seq=self.seq,
            now_ms=now,
            rtt_ms=rtt,
            ack_scheme=scheme,
            ack_params=params,
            k_app=k_app,
            keypair=self.keypair,
        )
        self.pending[name] = Pending(
            fixture=fix, verb=verb, scheme=scheme, seq=self.seq, x=x, first_sent=now, last_sent=now
        )
        self._transmit(name)

    def _timeout_ms(self, fix: Name) -> int:
        return max(4 * self.rtt.get(fix, self.rtt_guess_ms), 100)

    def _transmit(self, name: Name) -> None:
        p = self.pending[name]
        p.last_sent = self.sim.now_ms
        self._express(name)
        self.sim.after(self._timeout_ms(p.fixture), self._on_timeout, name, p.xmit)

    def _on_timeout(self, name: Name, xmit: int) -> None:
        p = self.pending.get(name)
        if p is None or p.xmit != xmit:
            return
        self.stats["timeouts"] += 1
        if p.xmit <= MAX_RETRANSMITS:
            p.xmit += 1
            self._transmit(name)
            return
        del self.pending[name]
        if self.fallback and p.scheme != ACK_SIG:
            # The signed ack is the scheme of last resort; reissue the verb.
            self.stats["fallbacks"] += 1
            self.queue.setdefault(p.fixture, collections.deque()).appendleft((p.verb, ACK_SIG))
        else:
            self.stats["failures"] += 1
            self.history.append(
                Outcome(
                    self.sim.now_ms,
                    p.fixture,
                    p.verb,
                    False,
                    p.scheme,
                    "timeout",
                    latency_ms=self.sim.now_ms - p.first_sent,
                )
            )
        self._pump(p.fixture)

    # -- receiving --

    def _on_content(self, host: Host, face: int, obj: ContentObject) -> None:
        if self._maybe_key_record(obj) or self._maybe_anchor(obj):
            return
        p = self.pending.get(obj.name)
        if p is None:
            self.stats["unsolicited"] += 1
            return
        if not self._check_ack(p, obj):
            self.stats["acks_bad"] += 1
            return
        del self.pending[obj.name]
        self.stats["acks_ok"] += 1
        if p.xmit == 1:  # retransmitted samples are ambiguous; skip them
            sample = self.sim.now_ms - p.last_sent
            old = self.rtt.get(p.fixture, self.rtt_guess_ms)
            self.rtt[p.fixture] = max(1, (3 * old + sample) // 4)
        self.history.append(
            Outcome(
                self.sim.now_ms,
                p.fixture,
                p.verb,
                True,
                p.scheme,
                latency_ms=self.sim.now_ms - p.first_sent,
            )
        )
        self._pump(p.fixture)

    def _maybe_key_record(self, obj: ContentObject) -> bool:
        if len(obj.name) < 2 or obj.name[-1] != b"key":
            return False
        fix = obj.name[:-1]
        if fix not in self.awaiting_key:
            return False
        try:
            record = KeyRecord.from_carrier(obj)
            if not crypto.verify_content(self.pk_root, obj):
                return False
        except Exception:
            return False
        self.awaiting_key.discard(fix)
        self.fixture_pks[fix] = record.pk
        self._pump(fix)
        return True

    def _maybe_anchor(self, obj: ContentObject) -> bool:
        for fix in list(self.awaiting_anchor):
            prefix = fix.append(ANCHOR_COMPONENT)
            if not prefix.is_prefix_of(obj.name):
                continue
            pk = self.fixture_pks.get(fix)
            if pk is None:
                return True
            try:
                anchor, length, gen = load_anchor_cert(pk, obj)
            except AckError:
                return True
            self.awaiting_anchor.discard(fix)
            self.verifiers[fix] = ChainVerifier(anchor, length=length)
            self.chain_gen[fix] = gen
            self._pump(fix)
            return True
        return False

    def _check_ack(self, p: Pending, obj: ContentObject) -> bool:
        try:
            view = parse_ack(obj)
        except AckError:
            return False
        k_app = self._k_app(p.fixture)
        if view.scheme == ACK_SIG:
            pk = self.fixture_pks.get(p.fixture)
            if pk is None or not verify_ack(obj, pk_fix=pk):
                return False
            self._apply_chain_hints(p.fixture, view)
            return True
        if view.scheme != p.scheme:
            return False  # only the signed fallback may substitute schemes
        if view.scheme == ACK_ENC:
            return verify_ack(obj, k_app=k_app, expected_x=p.x)
        if view.scheme == ACK_CHAIN:
            return verify_ack(obj, k_app=k_app, chain=self.verifiers.get(p.fixture))
        return verify_ack(obj, k_app=k_app)

    def _apply_chain_hints(self, fix: Name, view: ackauth.AckView) -> None:
        """Signed acks may carry chain sync or a fresh anchor; both are trusted."""
        try:
            status = view.status_dict()
        except Exception:
            return
        if "chain_anchor" in status:
            self.verifiers[fix] = ChainVerifier(
                bytes.fromhex(status["chain_anchor"]), length=int(status["chain_len"])
            )
            self.chain_gen[fix] = int(status["chain_gen"])
            return
        if "chain_index" in status and fix in self.verifiers:
            self.verifiers[fix].resync(
                int(status["chain_index"]), bytes.fromhex(status["chain_value"])
            )


class BaselineApp:
    """Legacy four-message sender: announce the command, serve it when
    the fixture fetches it, count the ack.  No keys anywhere."""

    def __init__(self, sim: Sim, host: Host, name_app: Name):
        self.sim = sim
        self.host = host
        self.name_app = name_app
        self.rng = sim.node_rng(host.name)
        self.seq = 0
        self._offered: dict[int, bytes] = {}
        self._sent_ms: dict[int, int] = {}
        self.latencies: list[int] = []
        self.sent = 0
        self.acked = 0
        host.interest_handler = self._on_interest
        host.content_handler = self._on_content

    def send_command(self, name_fix: Name, verb: bytes) -> None:
        self.seq += 1
        self.sent += 1
        self._offered[self.seq] = verb
        self._sent_ms[self.seq] = self.sim.now_ms
        name = (
            name_fix.append(PENDING_COMPONENT)
            .append(self.name_app.uri().encode())
            .append(self.seq.to_bytes(8, "big"))
        )
        self.host.send(0, Interest.fresh(name, rng=self.rng))

    def _on_interest(self, host: Host, face: int, interest: Interest) -> None:
        name = interest.name
        if len(name) != len(self.name_app) + 2 or name[-2] != CMD_COMPONENT:
            return
        if not self.name_app.is_prefix_of(name):
            return
        verb = self._offered.get(int.from_bytes(name[-1], "big"))
        if verb is not None:
            host.send(
                face, ContentObject(name=name, payload=verb, timestamp_ms=self.sim.now_ms)
            )

    def _on_content(self, host: Host, face: int, obj: ContentObject) -> None:
        if len(obj.name) < 3 or obj.name[-3] != PENDING_COMPONENT:
            return
        seq = int.from_bytes(obj.name[-1], "big")
        if self._offered.pop(seq, None) is not None:
            self.acked += 1
            self.latencies.append(self.sim.now_ms - self._sent_ms.pop(seq))
