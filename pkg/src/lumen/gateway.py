"""Live bridge between control panels and one running deployment.

Embeds a scenario with its simulator clock pinned to the wall clock
(one simulated millisecond per real millisecond) and exposes it over
TCP: newline-delimited JSON, or WebSocket for browsers.  Panels drive
one pre-authorized application identity from the scenario roster; the
gateway never touches fixture keys, so everything a panel does still
crosses the simulated network as authenticated commands.

The JSON schema is versioned with "v": 1 and documented in
docs/gateway.md.
"""

import base64
import collections
import hashlib
import json
import selectors
import socket
import time
from dataclasses import dataclass, field

from .names import Name
from .scenario import ConfigError, Env, build_env, load_scenario

SCHEMA_V = 1
RATE_HZ = 44  # per-fixture command budget, the DMX refresh cadence
FRAME_MS = 23  # ceil(1000 / RATE_HZ); spacing sends this far apart caps the rate
SEND_BUFFER_CAP = 1 << 20

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class GatewayError(Exception):
    pass


def _msg(t: str, **fields) -> dict:
    return {"v": SCHEMA_V, "t": t, **fields}


def _verb_for(op: str, args: list) -> bytes:
    """Map a panel op to a protocol verb; panels never write raw names."""
    if op in ("on", "off", "status"):
        return op.encode()
    if op == "intensity":
        return b"intensity/%d" % int(args[0])
    if op == "color":
        return ("color/" + str(args[0]).lstrip("#")).encode()
    if op == "calibrate":
        return ("calibrate/" + str(args[0])).encode()
    raise GatewayError(f"unknown op {op!r}")


# --- panel-side view of the deployment --------------------------------------


class _Feed:
    """Per-fixture command pacing: one send per frame, last write wins.

    Fades queue one step per frame; anything arriving faster than the
    frame budget is coalesced onto the newest value, so a drag burst
    never exceeds the rate and still lands on its final position.
    """

    def __init__(self, bridge: "PanelBridge", fixture: Name):
        self.bridge = bridge
        self.fixture = fixture
        self.next_free_ms = 0
        self.plan: collections.deque = collections.deque()  # (at_ms, verb)
        self.armed = False

    def push(self, verb: bytes) -> None:
        self.plan = collections.deque([(self.bridge.sim.now_ms, verb)])
        self._arm()

    def set_plan(self, steps) -> None:
        self.plan = collections.deque(steps)
        self._arm()

    def _arm(self) -> None:
        if self.armed or not self.plan:
            return
        at = max(self.bridge.sim.now_ms, self.next_free_ms, self.plan[0][0])
        self.armed = True
        self.bridge.sim.at(at, self._tick)

    def _tick(self) -> None:
        self.armed = False
        now = self.bridge.sim.now_ms
        due = None
        while self.plan and self.plan[0][0] <= now:
            due = self.plan.popleft()  # collapse everything due onto the newest
        if due is None:
            self._arm()
            return
        if now < self.next_free_ms:
            self.plan.appendleft((self.next_free_ms, due[1]))
            self._arm()
            return
        self.next_free_ms = now + FRAME_MS
        self.bridge.submit(self.fixture, due[1])
        self._arm()


class PanelBridge:
    """Funnels panel messages into the deployment's panel application.

    All submissions go through one application actor, so the usual
    protocol path (authenticated interest, ack verification, retries)
    is what decides every status the panel sees.
    """

    def __init__(self, env: Env):
        self.env = env
        self.sim = env.sim
        self.app = self._panel_app(env)
        self.fixtures = {f.name.uri(): f for f in env.fixtures}
        self.feeds = {f.name.uri(): _Feed(self, f.name) for f in env.fixtures}
        self.sent = 0
        self._relayed = len(self.app.history)
        self._seen_denials = {u: collections.Counter() for u in self.fixtures}
        self._last_ack_ms: dict = {u: None for u in self.fixtures}
        self._last_state = None

    @staticmethod
    def _panel_app(env: Env):
        for app in env.apps:
            if b"panel" in app.name_app.components:
                return app
        return env.apps[0]

    def submit(self, fixture: Name, verb: bytes) -> None:
        self.sent += 1
        self.app.send_command(fixture, verb)

    # -- client messages --

    def handle(self, doc: dict) -> None:
        t = doc.get("t")
        if t == "cmd":
            fix = self._fixture(doc)
            self.feeds[fix].push(_verb_for(doc.get("op", ""), doc.get("args", [])))
        elif t == "fade":
            fix = self._fixture(doc)
            self.feeds[fix].set_plan(self._fade_steps(fix, doc))
        else:
            raise GatewayError(f"unknown message type {t!r}")

    def _fixture(self, doc: dict) -> str:
        fix = doc.get("fixture")
        if fix not in self.fixtures:
            raise GatewayError(f"unknown fixture {fix!r}")
        return fix

    def _fade_steps(self, fix: str, doc: dict):
        """A fade names a DMX target (0..255); steps run at the frame rate."""
        try:
            target = round(min(255, max(0, int(doc["target"]))) * 100 / 255)
            duration_ms = max(0, int(doc.get("duration_ms", 0)))
        except (KeyError, TypeError, ValueError):
            raise GatewayError("fade needs integer target and duration_ms")
        start = self.fixtures[fix].state.light.intensity
        now = self.sim.now_ms
        n = max(1, round(duration_ms * RATE_HZ / 1000))
        return [
            (
                now + (i - 1) * 1000 // RATE_HZ,
                b"intensity/%d" % (start + round((target - start) * i / n)),
            )
            for i in range(1, n + 1)
        ]

    # -- server messages --

    def drain_acks(self) -> list:
        """Ack messages for panel-app outcomes since the last drain.

        A failed command never produced a verifiable ack; the verdict
        tally of the embedded fixture says why, which a deployment
        spread over real hardware could not see.  Relaying it is the
        gateway's one god's-eye convenience.
        """
        out = []
        history = self.app.history
        for o in list(history)[self._relayed :]:
            uri = o.fixture.uri()
            if o.ok:
                status = "ok"
                self._last_ack_ms[uri] = o.time_ms
            else:
                status = self._failure_reason(uri)
            out.append(
                _msg(
                    "ack",
                    fixture=uri,
                    status=status,
                    latency_ms=o.latency_ms,
                    verb=o.verb.decode("latin-1"),
                )
            )
        self._relayed = len(history)
        return out

    def _failure_reason(self, uri: str) -> str:
        denials = self.fixtures[uri].denials
        seen = self._seen_denials[uri]
        delta = {r: n - seen[r] for r, n in denials.items() if n > seen[r]}
        self._seen_denials[uri] = collections.Counter(denials)
        if not delta:
            return "timeout"
        return max(delta, key=delta.get)

    def _roster(self) -> list:
        return [
            {
                "name": uri,
                "on": f.state.light.on,
                "intensity": f.state.light.intensity,
                "rgb": f.state.light.color,
                "last_ack_ms": self._last_ack_ms[uri],
            }
            for uri, f in self.fixtures.items()
        ]

    def snapshot_msg(self) -> dict:
        """Current state for a fresh client; broadcast tracking untouched."""
        return _msg("state", fixtures=self._roster())

    def state_msg(self):
        """Current state if it differs from the last broadcast, else None."""
        roster = self._roster()
        if roster == self._last_state:
            return None
        self._last_state = [dict(r) for r in roster]
        return _msg("state", fixtures=roster)


# --- wire framing -----------------------------------------------------------


def _ws_accept(key: str) -> str:
    digest = hashlib.sha1((key + _WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def _ws_frame(payload: bytes, opcode: int = 1) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        return head + bytes([n]) + payload
    if n < 1 << 16:
        return head + bytes([126]) + n.to_bytes(2, "big") + payload
    return head + bytes([127]) + n.to_bytes(8, "big") + payload


def _ws_parse(buf: bytearray):
    """Pop complete frames off buf; yields (opcode, payload) pairs."""
    frames = []
    while True:
        if len(buf) < 2:
            break
        b0, b1 = buf[0], buf[1]
        opcode = b0 & 0x0F
        masked = bool(b1 & 0x80)
        n = b1 & 0x7F
        pos = 2
        if n == 126:
            if len(buf) < 4:
                break
            n = int.from_bytes(buf[2:4], "big")
            pos = 4
        elif n == 127:
            if len(buf) < 10:
                break
            n = int.from_bytes(buf[2:10], "big")
            pos = 10
        mask = b""
        if masked:
            if len(buf) < pos + 4:
                break
            mask = bytes(buf[pos : pos + 4])
            pos += 4
        if len(buf) < pos + n:
            break
        payload = bytes(buf[pos : pos + n])
        if masked:
            payload = bytes(c ^ mask[i % 4] for i, c in enumerate(payload))
        del buf[: pos + n]
        frames.append((opcode, payload, bool(b0 & 0x80)))
    return frames


@dataclass
class _Session:
    sock: socket.socket
    addr: tuple
    mode: str = ""  # "", then "ndjson" | "ws"
    inbuf: bytearray = field(default_factory=bytearray)
    outbuf: bytearray = field(default_factory=bytearray)
    authed: bool = False
    fragments: bytearray = field(default_factory=bytearray)
    closing: bool = False


class Gateway:
    """One selector loop: sockets, the wall-clock pump, and broadcasts."""

    def __init__(self, scenario, token: str | None = None):
        sc = load_scenario(scenario)
        if sc.mode != "authenticated":
            raise ConfigError("the gateway needs an authenticated-mode scenario")
        self.env = build_env(sc)
        for step in sc.workload:  # scenario traffic keeps running underneath
            self.env.sim.at(
                step.at_ms,
                self.env.apps[step.app].send_command,
                sc.fixtures[step.fixture].name,
                step.verb,
            )
        self.bridge = PanelBridge(self.env)
        self.token = token
        self.sessions: dict = {}
        self._t0 = time.monotonic()
        self._pumped_ms = 0

    # -- clock --

    def pump(self) -> list:
        """Advance the deployment to the current wall time; collect pushes."""
        elapsed = int((time.monotonic() - self._t0) * 1000)
        if elapsed > self._pumped_ms:
            self.env.sim.run(until_ms=elapsed)
            self._pumped_ms = elapsed
        pushes = self.bridge.drain_acks()
        state = self.bridge.state_msg()
        if state is not None:
            pushes.append(state)
        return pushes

    # -- per-client plumbing --

    def _send(self, s: _Session, doc: dict) -> None:
        raw = json.dumps(doc, separators=(",", ":")).encode()
        if s.mode == "ws":
            s.outbuf += _ws_frame(raw)
        else:
            s.outbuf += raw + b"\n"
        if len(s.outbuf) > SEND_BUFFER_CAP:
            s.closing = True

    def _on_message(self, s: _Session, raw: bytes) -> None:
        try:
            doc = json.loads(raw)
            if not isinstance(doc, dict):
                raise ValueError("not an object")
        except ValueError:
            self._send(s, _msg("err", reason="message is not a JSON object"))
            return
        if not s.authed:
            if doc.get("t") == "auth" and doc.get("token") == self.token:
                s.authed = True
                self._send(s, self.bridge.snapshot_msg())
            else:
                self._send(s, _msg("err", reason="auth required"))
                s.closing = True
            return
        try:
            self.bridge.handle(doc)
        except GatewayError as e:
            self._send(s, _msg("err", reason=str(e)))
        except (KeyError, IndexError, TypeError, ValueError):
            self._send(s, _msg("err", reason="bad message arguments"))

    def _on_bytes(self, s: _Session, data: bytes) -> None:
        s.inbuf += data
        if not s.mode:
            if s.inbuf[:4] == b"GET " or (len(s.inbuf) < 4 and b"GET "[: len(s.inbuf)] == s.inbuf):
                if b"\r\n\r\n" not in s.inbuf:
                    return
                self._upgrade(s)
                if s.mode != "ws":
                    return
            else:
                s.mode = "ndjson"
                if self.token is None:
                    s.authed = True
                    self._send(s, self.bridge.snapshot_msg())
        if s.mode == "ndjson":
            while b"\n" in s.inbuf:
                line, _, rest = bytes(s.inbuf).partition(b"\n")
                s.inbuf = bytearray(rest)
                if line.strip():
                    self._on_message(s, line)
        elif s.mode == "ws":
            for opcode, payload, fin in _ws_parse(s.inbuf):
                if opcode == 8:
                    s.outbuf += _ws_frame(payload, opcode=8)
                    s.closing = True
                elif opcode == 9:
                    s.outbuf += _ws_frame(payload, opcode=10)
                elif opcode in (0, 1, 2):
                    s.fragments += payload
                    if fin:
                        msg = bytes(s.fragments)
                        s.fragments.clear()
                        self._on_message(s, msg)

    def _upgrade(self, s: _Session) -> None:
        head, _, rest = bytes(s.inbuf).partition(b"\r\n\r\n")
        s.inbuf = bytearray(rest)
        headers = {}
        for line in head.split(b"\r\n")[1:]:
            k, _, v = line.partition(b":")
            headers[k.strip().lower()] = v.strip()
        key = headers.get(b"sec-websocket-key")
        if b"websocket" not in headers.get(b"upgrade", b"").lower() or key is None:
            s.outbuf += b"HTTP/1.1 426 Upgrade Required\r\nConnection: close\r\n\r\n"
            s.closing = True
            return
        s.outbuf += (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\nConnection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {_ws_accept(key.decode())}\r\n\r\n"
        ).encode()
        s.mode = "ws"
        request_line = head.split(b"\r\n", 1)[0].decode("latin-1")
        if self.token is None or f"token={self.token}" in request_line:
            s.authed = True
            self._send(s, self.bridge.snapshot_msg())

    # -- the loop --

    def serve(self, listen: str, *, stop=None, max_wall_s=None, on_bound=None) -> int:
        host, _, port = listen.rpartition(":")
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host or "127.0.0.1", int(port)))
        srv.listen()
        srv.setblocking(False)
        if on_bound is not None:
            on_bound(srv.getsockname())
        sel = selectors.DefaultSelector()
        sel.register(srv, selectors.EVENT_READ)
        deadline = None if max_wall_s is None else time.monotonic() + max_wall_s
        try:
            while True:
                if stop is not None and stop.is_set():
                    return 0
                if deadline is not None and time.monotonic() >= deadline:
                    return 0
                for key, _ in sel.select(timeout=0.005):
                    if key.fileobj is srv:
                        conn, addr = srv.accept()
                        conn.setblocking(False)
                        self.sessions[conn] = _Session(conn, addr)
                        sel.register(conn, selectors.EVENT_READ)
                        continue
                    sess = self.sessions.get(key.fileobj)
                    if sess is None:
                        continue
                    try:
                        data = key.fileobj.recv(65536)
                    except (BlockingIOError, InterruptedError):
                        continue
                    except OSError:
                        data = b""
                    if not data:
                        self._drop(sel, sess)
                        continue
                    try:
                        self._on_bytes(sess, data)
                    except Exception:
                        self._drop(sel, sess)
                pushes = self.pump()
                for sess in list(self.sessions.values()):
                    if sess.authed:
                        for doc in pushes:
                            self._send(sess, doc)
                    self._flush(sel, sess)
        except KeyboardInterrupt:
            return 0
        finally:
            for sess in list(self.sessions.values()):
                self._drop(sel, sess)
            sel.unregister(srv)
            srv.close()
            sel.close()

    def _flush(self, sel, sess: _Session) -> None:
        if sess.outbuf:
            try:
                sent = sess.sock.send(sess.outbuf)
                del sess.outbuf[:sent]
            except (BlockingIOError, InterruptedError):
                pass
            except OSError:
                sess.closing = True
        if sess.closing and not sess.outbuf:
            self._drop(sel, sess)

    def _drop(self, sel, sess: _Session) -> None:
        if sess.sock not in self.sessions:
            return
        del self.sessions[sess.sock]
        try:
            sel.unregister(sess.sock)
        except (KeyError, ValueError):
            pass
        sess.sock.close()


def serve(listen: str, scenario, token: str | None = None, **kwargs) -> int:
    """Entry point used by the command line: serve one scenario forever."""
    return Gateway(scenario, token=token).serve(listen, **kwargs)
