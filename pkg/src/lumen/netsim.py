"""Discrete-event simulation of a small interest/content network.

One virtual clock drives everything; every packet delivery, timeout,
and adversary action is a heap event, and any randomness a node needs
comes from an RNG derived from (simulation seed, node id).  Two runs
of the same scenario therefore produce byte-identical event logs,
which is what the log-fold metrics and the regression oracles rely on.

Routers implement the usual trio: a pending-interest table that
collapses duplicate requests, a longest-prefix forwarding table, and
a FIFO content store.  They can additionally hold the ack commitment
parsed from a command's token and discard forged acknowledgments in
the network, before they ever reach the application.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field, replace

from .ackauth import router_ack_acceptable
from .control import AuthToken, MalformedCommand, split_command_name
from .names import Name
from .packets import ContentObject, Interest


@dataclass(frozen=True)
class LogEntry:
    time_ms: int
    node: str
    face: int
    direction: str  # "in" | "out"
    pkt_type: str  # "interest" | "content"
    name: Name

    def line(self) -> str:
        return f"{self.time_ms} {self.node} f{self.face} {self.direction} {self.pkt_type} {self.name.uri()}"


def _pkt_type(pkt) -> str:
    return "interest" if isinstance(pkt, Interest) else "content"


class Sim:
    def __init__(self, seed: int = 0):
        self.seed = seed
        self.now_ms = 0
        self.log: list[LogEntry] = []
        self.packets: list = []  # aligned with log; packet behind each entry
        self._q: list = []
        self._seq = 0

    def at(self, time_ms: int, fn, *args) -> None:
        if time_ms < self.now_ms:
            raise ValueError("cannot schedule into the past")
        heapq.heappush(self._q, (time_ms, self._seq, fn, args))
        self._seq += 1

    def after(self, delay_ms: int, fn, *args) -> None:
        self.at(self.now_ms + delay_ms, fn, *args)

    def run(self, until_ms: int | None = None) -> None:
        while self._q:
            if until_ms is not None and self._q[0][0] > until_ms:
                break
            time_ms, _, fn, args = heapq.heappop(self._q)
            self.now_ms = time_ms
            fn(*args)
        if until_ms is not None and until_ms > self.now_ms:
            self.now_ms = until_ms

    def node_rng(self, node_id: str) -> random.Random:
        digest = hashlib.sha256(self.seed.to_bytes(8, "big") + node_id.encode()).digest()
        return random.Random(int.from_bytes(digest, "big"))

    def log_pkt(self, node: str, face: int, direction: str, pkt) -> None:
        self.log.append(
            LogEntry(self.now_ms, node, face, direction, _pkt_type(pkt), pkt.name)
        )
        self.packets.append(pkt)

    def format_log(self) -> list[str]:
        return [e.line() for e in self.log]


# --- Nodes ------------------------------------------------------------------


class Node:
    def __init__(self, sim: Sim, name: str):
        self.sim = sim
        self.name = name
        self.faces: list = []

    def attach(self, link) -> int:
        self.faces.append(link)
        return len(self.faces) - 1

    def send(self, face: int, pkt) -> None:
        self.sim.log_pkt(self.name, face, "out", pkt)
        self.faces[face].transmit(self, pkt)

    def receive(self, face: int, pkt) -> None:
        self.sim.log_pkt(self.name, face, "in", pkt)
        self.handle(face, pkt)

    def handle(self, face: int, pkt) -> None:
        raise NotImplementedError


class Host(Node):
    """An endpoint: applications, fixtures, and managers live here.

    Behavior is injected; the host only logs and dispatches.
    """

    def __init__(self, sim: Sim, name: str):
        super().__init__(sim, name)
        self.interest_handler = None
        self.content_handler = None

    def handle(self, face: int, pkt) -> None:
        if isinstance(pkt, Interest):
            if self.interest_handler is not None:
                self.interest_handler(self, face, pkt)
        else:
            if self.content_handler is not None:
                self.content_handler(self, face, pkt)


@dataclass
class PitEntry:
    name: Name
    faces: list[int]
    nonces: list[bytes]
    expiry_ms: int
    token: AuthToken | None = None


class Router(Node):
    def __init__(
        self,
        sim: Sim,
        name: str,
        cs_capacity: int = 32,
        ack_filter: bool = True,
        command_prefixes: tuple[Name, ...] = (),
    ):
        super().__init__(sim, name)
        self.cs_capacity = cs_capacity
        self.ack_filter = ack_filter
        self.command_prefixes = tuple(command_prefixes)
        self.fib: list[tuple[Name, int]] = []
        self.pit: dict[Name, PitEntry] = {}
        self.cs: dict[Name, ContentObject] = {}  # insertion order is FIFO age
        self.dropped_acks = 0

    def add_route(self, prefix: Name, face: int) -> None:
        self.fib.append((prefix, face))

    def _next_hop(self, name: Name) -> int | None:
        best = None
        best_len = -1
        for prefix, face in self.fib:
            if prefix.is_prefix_of(name) and len(prefix) > best_len:
                best, best_len = face, len(prefix)
        return best

    def _cs_lookup(self, name: Name) -> ContentObject | None:
        for cached_name, obj in self.cs.items():
            if name.is_prefix_of(cached_name):
                return obj
        return None

    def _cs_insert(self, obj: ContentObject) -> None:
        if self.cs_capacity <= 0:
            return
        if obj.name in self.cs:
            del self.cs[obj.name]
        self.cs[obj.name] = obj
        while len(self.cs) > self.cs_capacity:
            oldest = next(iter(self.cs))
            del self.cs[oldest]

    def _command_token(self, name: Name) -> AuthToken | None:
        for prefix in self.command_prefixes:
            if not prefix.is_prefix_of(name):
                continue
            try:
                _, _, token_bytes = split_command_name(prefix, name)
                return AuthToken.decode(token_bytes)
            except MalformedCommand:
                return None
        return None

    def handle(self, face: int, pkt) -> None:
        if isinstance(pkt, Interest):
            self._on_interest(face, pkt)
        else:
            self._on_content(face, pkt)

    def _forward(self, face: int, interest: Interest) -> None:
        nh = self._next_hop(interest.name)
        if nh is not None and nh != face:
            self.send(nh, interest)

    def _on_interest(self, face: int, interest: Interest) -> None:
        now = self.sim.now_ms
        cached = self._cs_lookup(interest.name)
        if cached is not None:
            self.send(face, cached)
            return
        entry = self.pit.get(interest.name)
        if entry is not None and entry.expiry_ms <= now:
            del self.pit[interest.name]
            entry = None
        if entry is None:
            entry = PitEntry(
                name=interest.name,
                faces=[face],
                nonces=[interest.nonce],
                expiry_ms=now + interest.lifetime_ms,
                token=self._command_token(interest.name),
            )
            self.pit[interest.name] = entry
            self._forward(face, interest)
            return
        entry.expiry_ms = max(entry.expiry_ms, now + interest.lifetime_ms)
        if interest.nonce in entry.nonces:
            # Seen this exact request (a loop or an in-path replay): absorb.
            if face not in entry.faces:
                entry.faces.append(face)
            return
        entry.nonces.append(interest.nonce)
        if face in entry.faces:
            # Same consumer with a fresh nonce gave up waiting; push again.
            self._forward(face, interest)
        else:
            entry.faces.append(face)  # coincident demand already pending upstream

    def _on_content(self, face: int, obj: ContentObject) -> None:
        now = self.sim.now_ms
        matched = [
            e
            for e in self.pit.values()
            if e.expiry_ms > now and e.name.is_prefix_of(obj.name)
        ]
        if not matched:
            return  # unsolicited
        live = []
        for entry in matched:
            if (
                self.ack_filter
                and entry.token is not None
                and not router_ack_acceptable(entry.token, obj)
            ):
                self.dropped_acks += 1
                continue  # entry stays; a genuine ack may still arrive
            live.append(entry)
        if not live:
            return
        for entry in live:
            del self.pit[entry.name]
            for out_face in entry.faces:
                if out_face != face:
                    self.send(out_face, obj)
        self._cs_insert(obj)


# --- Links and adversaries --------------------------------------------------


@dataclass
class Rule:
    """One adversary behavior, applied to packets that match its filters."""

    action: str  # drop | delay | duplicate | modify | record | replay
    pkt_type: str | None = None
    prefix: Name | None = None
    start_ms: int = 0
    end_ms: int | None = None
    count: int | None = None  # applications remaining; None is unlimited
    delay_ms: int = 0
    at_ms: int = 0  # replay trigger time
    prob: float = 1.0  # chance the rule fires on a matching packet
    applied: int = field(default=0, compare=False)

    def matches(self, pkt, now_ms: int) -> bool:
        if self.pkt_type is not None and _pkt_type(pkt) != self.pkt_type:
            return False
        if self.prefix is not None and not self.prefix.is_prefix_of(pkt.name):
            return False
        if now_ms < self.start_ms:
            return False
        if self.end_ms is not None and now_ms >= self.end_ms:
            return False
        if self.count is not None and self.applied >= self.count:
            return False
        return True


def _tamper(pkt):
    """Flip one bit: payload for content, last name component for interests."""
    if isinstance(pkt, ContentObject):
        payload = pkt.payload or b"\x00"
        return replace(pkt, payload=payload[:-1] + bytes([payload[-1] ^ 0x01]))
    comp = pkt.name[-1]
    bent = comp[:-1] + bytes([comp[-1] ^ 0x01])
    return replace(pkt, name=Name(pkt.name.components[:-1] + (bent,)))


class Adversary:
    """On-path attacker bound to one link; behavior is its rule list."""

    def __init__(self, rules: list[Rule]):
        self.rules = list(rules)
        self.recorded: list[tuple[str, object]] = []  # (direction, pkt)
        self._link = None
        self.rng = random.Random(0)  # replaced with the sim's stream on bind

    def bind(self, sim: Sim, link: "Link") -> None:
        self._link = link
        self.rng = sim.node_rng("adversary")
        for rule in self.rules:
            if rule.action == "replay":
                sim.at(rule.at_ms, self._fire_replay, rule)

    def _fires(self, rule: Rule, pkt, now_ms: int) -> bool:
        if not rule.matches(pkt, now_ms):
            return False
        return rule.prob >= 1.0 or self.rng.random() < rule.prob

    def _fire_replay(self, rule: Rule) -> None:
        for direction, pkt in list(self.recorded):
            if rule.matches(pkt, rule.at_ms):
                self._link.inject(direction, pkt)

    def process(self, direction: str, pkt, now_ms: int) -> list[tuple[int, object]]:
        """Deliveries for one packet crossing the link: (extra delay, packet)."""
        for rule in self.rules:
            if rule.action == "record" and rule.matches(pkt, now_ms):
                rule.applied += 1
                self.recorded.append((direction, pkt))
        for rule in self.rules:
            if rule.action in ("record", "replay") or not self._fires(rule, pkt, now_ms):
                continue
            rule.applied += 1
            if rule.action == "drop":
                return []
            if rule.action == "delay":
                return [(rule.delay_ms, pkt)]
            if rule.action == "duplicate":
                return [(0, pkt), (max(rule.delay_ms, 1), pkt)]
            if rule.action == "modify":
                return [(0, _tamper(pkt))]
        return [(0, pkt)]


class Link:
    """Bidirectional pipe with a fixed one-way delay; adversaries sit here."""

    def __init__(self, sim: Sim, a: Node, b: Node, delay_ms: int = 1, adversary: Adversary | None = None):
        self.sim = sim
        self.delay_ms = delay_ms
        self.adversary = adversary
        self.a = a
        self.b = b
        self.fa = a.attach(self)
        self.fb = b.attach(self)
        if adversary is not None:
            adversary.bind(sim, self)

    def _dst(self, direction: str) -> tuple[Node, int]:
        return (self.b, self.fb) if direction == "ab" else (self.a, self.fa)

    def transmit(self, src: Node, pkt) -> None:
        direction = "ab" if src is self.a else "ba"
        deliveries = (
            self.adversary.process(direction, pkt, self.sim.now_ms)
            if self.adversary is not None
            else [(0, pkt)]
        )
        for extra, p in deliveries:
            self._schedule(direction, p, extra)

    def inject(self, direction: str, pkt) -> None:
        self._schedule(direction, pkt, 0)

    def _schedule(self, direction: str, pkt, extra_delay: int) -> None:
        dst, dst_face = self._dst(direction)
        self.sim.after(self.delay_ms + extra_delay, dst.receive, dst_face, pkt)
