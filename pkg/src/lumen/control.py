"""Authenticated lighting commands and fixture-side verification.

A command travels as an interest whose name carries everything the
fixture needs: its own prefix, the sending application's full
(attribute-bearing) name, the command verb, and a trailing
authentication token.  The token binds a sequence number, a timestamp,
the sender's round-trip estimate, the requested acknowledgment scheme,
and an authenticator (MAC under the per-application key, or a
signature under the application's published key).

Per-application keys are never stored at the fixture: k_app is derived
on demand as PRF(k_fix, name_app), so the application's attribute set
is welded into its key.  Renaming yourself to claim wider attributes
yields a key the fixture will never derive.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

from . import crypto
from .crypto import KeyPair, PublicKey
from .names import Name
from .packets import encode_name
from .trust import (
    Acl,
    DanglingAttributeName,
    KeyRecord,
    evaluate_policy,
    parse_attributes,
)

CMD_AUTH_DOMAIN = b"lumen-cmd-v1"

# Acknowledgment schemes an application may request in the token.
ACK_SIG = 0x00
ACK_MAC = 0x01
ACK_ENC = 0x02
ACK_CHAIN = 0x03

# enc carries y (16, encrypted challenge) + z (32, its hash);
# chain carries the 32-byte value the revealed link must hash to.
SCHEME_PARAM_LEN = {ACK_SIG: 0, ACK_MAC: 0, ACK_ENC: 48, ACK_CHAIN: 32}

# Authenticator kinds.
KIND_MAC = 0x00
KIND_SIG = 0x01

MAC_LEN = 32

STALE_FLOOR_MS = 1000
# Cap keeps every staleness window well inside the replay-table
# retention; otherwise evicting a seq entry could reopen it to replay.
STALE_CAP_MS = 30_000
REPLAY_RETENTION_MS = 60_000

ENC_MARK = b"\x00"  # plain verbs are ASCII, so a NUL lead byte is unambiguous

_TOKEN_FIXED = struct.Struct(">QIII")  # seq, ts_sec, ts_usec, rtt_ms


class CommandError(Exception):
    pass


class MalformedCommand(CommandError):
    pass


class PairingMacMismatch(CommandError):
    pass


class AlreadyBootstrapped(CommandError):
    pass


class NotBootstrapped(CommandError):
    pass


# --- Authentication token ---------------------------------------------------


@dataclass(frozen=True)
class AuthToken:
    seq: int
    ts_sec: int
    ts_usec: int
    rtt_ms: int
    ack_scheme: int = ACK_SIG
    ack_params: bytes = b""
    auth_kind: int = KIND_MAC
    authenticator: bytes = b""

    def state_bytes(self) -> bytes:
        """Everything the authenticator covers (all fields but itself)."""
        return (
            _TOKEN_FIXED.pack(self.seq, self.ts_sec, self.ts_usec, self.rtt_ms)
            + bytes([self.ack_scheme])
            + self.ack_params
            + bytes([self.auth_kind])
        )

    def encode(self) -> bytes:
        return self.state_bytes() + self.authenticator

    @property
    def ts_ms(self) -> int:
        return self.ts_sec * 1000 + self.ts_usec // 1000

    @classmethod
    def decode(cls, data: bytes) -> "AuthToken":
        if len(data) < _TOKEN_FIXED.size + 2:
            raise MalformedCommand("token too short")
        seq, ts_sec, ts_usec, rtt_ms = _TOKEN_FIXED.unpack_from(data)
        if ts_usec >= 1_000_000:
            raise MalformedCommand("token microseconds out of range")
        off = _TOKEN_FIXED.size
        scheme = data[off]
        off += 1
        plen = SCHEME_PARAM_LEN.get(scheme)
        if plen is None:
            raise MalformedCommand(f"unknown ack scheme 0x{scheme:02x}")
        if len(data) < off + plen + 1:
            raise MalformedCommand("token truncated in scheme parameters")
        params = data[off : off + plen]
        off += plen
        kind = data[off]
        off += 1
        auth = data[off:]
        if kind == KIND_MAC:
            if len(auth) != MAC_LEN:
                raise MalformedCommand("MAC authenticator must be 32 bytes")
        elif kind == KIND_SIG:
            if not auth:
                raise MalformedCommand("empty signature authenticator")
        else:
            raise MalformedCommand(f"unknown authenticator kind 0x{kind:02x}")
        return cls(seq, ts_sec, ts_usec, rtt_ms, scheme, params, kind, auth)


def staleness_window_ms(rtt_ms: int) -> int:
    return min(max(STALE_FLOOR_MS, 2 * rtt_ms + 500), STALE_CAP_MS)


# --- Command names ----------------------------------------------------------


def assemble_command_name(name_fix: Name, name_app: Name, cmd: bytes, token_bytes: bytes) -> Name:
    """fixture prefix / app-component count / app components / verb / token.

    The count byte marks where the embedded application name ends, so
    the split never guesses.
    """
    if len(name_app) == 0:
        raise MalformedCommand("application name must have at least one component")
    if len(name_app) > 255:
        raise MalformedCommand("application name too long to count in one byte")
    comps = (
        name_fix.components
        + (bytes([len(name_app)]),)
        + name_app.components
        + (cmd, token_bytes)
    )
    return Name(comps)


def split_command_name(name_fix: Name, name: Name) -> tuple[Name, bytes, bytes]:
    """Inverse of assemble_command_name; MalformedCommand on any mismatch."""
    n = len(name_fix)
    if not name_fix.is_prefix_of(name):
        raise MalformedCommand("name does not start with this fixture's prefix")
    if len(name) < n + 4:  # count + >=1 app comp + verb + token
        raise MalformedCommand("too few components for a command")
    count_comp = name[n]
    if len(count_comp) != 1:
        raise MalformedCommand("count component must be one byte")
    k = count_comp[0]
    if k == 0 or len(name) != n + 1 + k + 2:
        raise MalformedCommand("component count does not match name length")
    name_app = Name(name.components[n + 1 : n + 1 + k])
    cmd = name[n + 1 + k]
    token_bytes = name[n + 2 + k]
    return name_app, cmd, token_bytes


def command_auth_input(base_name: Name, token: AuthToken) -> bytes:
    """Bytes the authenticator covers: full name minus token, plus token state."""
    return CMD_AUTH_DOMAIN + encode_name(base_name) + token.state_bytes()


# --- Key derivation and handoff ---------------------------------------------


def derive_app_key(k_fix: bytes, name_app: Name) -> bytes:
    """k_app = PRF(k_fix, canonical encoding of the application's name)."""
    return crypto.prf(k_fix, encode_name(name_app))


def wrap_app_key(pk_app: PublicKey, k_app: bytes) -> bytes:
    """Hand k_app to an application under its public key."""
    return crypto.rsa_encrypt(pk_app, k_app)


def unwrap_app_key(kp_app: KeyPair, blob: bytes) -> bytes:
    return crypto.rsa_decrypt(kp_app, blob)


# --- Optional command confidentiality ---------------------------------------


def _cmd_stream_nonce(seq: int) -> bytes:
    return seq.to_bytes(16, "big")


def encrypt_command(k_app: bytes, seq: int, cmd: bytes) -> bytes:
    """Opaque verb component; the sequence number keys the stream nonce."""
    return ENC_MARK + crypto.aes_ctr_encrypt(k_app[:16], _cmd_stream_nonce(seq), cmd)


def decrypt_command(k_app: bytes, seq: int, comp: bytes) -> bytes:
    if not comp.startswith(ENC_MARK):
        raise MalformedCommand("not an encrypted command component")
    return crypto.aes_ctr_decrypt(k_app[:16], _cmd_stream_nonce(seq), comp[1:])


# --- Command registry -------------------------------------------------------


@dataclass(frozen=True)
class CommandRegistry:
    """Maps command verbs to the access class they require."""

    exact: tuple[tuple[bytes, bytes], ...] = ()
    prefixes: tuple[tuple[bytes, bytes], ...] = ()

    def class_of(self, cmd: bytes) -> bytes | None:
        for verb, cls in self.exact:
            if cmd == verb:
                return cls
        for pre, cls in self.prefixes:
            if cmd.startswith(pre):
                return cls
        return None


DEFAULT_REGISTRY = CommandRegistry(
    exact=(
        (b"on", b"actuate"),
        (b"off", b"actuate"),
        (b"status", b"read-only"),
    ),
    prefixes=(
        (b"intensity/", b"actuate"),
        (b"color/", b"actuate"),
        (b"calibrate/", b"full-access"),
    ),
)


# --- Building commands (application side) -----------------------------------


def make_token(
    *,
    seq: int,
    now_ms: int,
    rtt_ms: int = 0,
    ack_scheme: int = ACK_SIG,
    ack_params: bytes = b"",
    auth_kind: int = KIND_MAC,
) -> AuthToken:
    if len(ack_params) != SCHEME_PARAM_LEN[ack_scheme]:
        raise MalformedCommand("scheme parameter length mismatch")
    return AuthToken(
        seq=seq,
        ts_sec=now_ms // 1000,
        ts_usec=(now_ms % 1000) * 1000,
        rtt_ms=rtt_ms,
        ack_scheme=ack_scheme,
        ack_params=ack_params,
        auth_kind=auth_kind,
    )


def build_command(
    name_fix: Name,
    name_app: Name,
    cmd: bytes,
    *,
    seq: int,
    now_ms: int,
    rtt_ms: int = 0,
    ack_scheme: int = ACK_SIG,
    ack_params: bytes = b"",
    k_app: bytes | None = None,
    keypair: KeyPair | None = None,
    encrypt: bool = False,
) -> Name:
    """Assemble a fully authenticated command name.

    With k_app the authenticator is a MAC; with keypair it is a
    signature under the application's published key.  Exactly one must
    be given (k_app may additionally be present for encryption).
    """
    auth_kind = KIND_SIG if keypair is not None else KIND_MAC
    if auth_kind == KIND_MAC and k_app is None:
        raise CommandError("need k_app or keypair to authenticate")
    if encrypt:
        if k_app is None:
            raise CommandError("command encryption needs k_app")
        cmd = encrypt_command(k_app, seq, cmd)
    token = make_token(
        seq=seq,
        now_ms=now_ms,
        rtt_ms=rtt_ms,
        ack_scheme=ack_scheme,
        ack_params=ack_params,
        auth_kind=auth_kind,
    )
    base = name_fix + Name((bytes([len(name_app)]),)) + name_app + Name((cmd,))
    msg = command_auth_input(base, token)
    if auth_kind == KIND_MAC:
        authenticator = crypto.mac(k_app, msg)
    else:
        authenticator = crypto.sign_raw(keypair, msg)
    token = replace(token, authenticator=authenticator)
    return base.append(token.encode())


# --- Fixture state and verification -----------------------------------------


@dataclass
class LightState:
    on: bool = False
    intensity: int = 0
    color: str = "ffffff"
    calibration: dict = field(default_factory=dict)

    def snapshot(self) -> dict:
        return {"on": self.on, "intensity": self.intensity, "color": self.color}


@dataclass(frozen=True)
class CommandResult:
    ok: bool
    reason: str = ""
    detail: str = ""
    name_app: Name | None = None
    cmd: bytes = b""
    token: AuthToken | None = None
    status: dict | None = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class BootstrapOffer:
    fixture_name: Name
    domain: bytes
    wrapped_key: bytes
    root_pk: bytes
    tag: bytes


@dataclass(frozen=True)
class BootstrapAccept:
    fixture_name: Name
    tag: bytes


def _pairing_keys(pairing_key: bytes) -> tuple[bytes, bytes]:
    return crypto.prf(pairing_key, b"bootstrap-wrap")[:16], crypto.prf(pairing_key, b"bootstrap-mac")


_ZERO_NONCE = bytes(16)


def _offer_mac_input(fixture_name: Name, domain: bytes, wrapped: bytes, root_pk: bytes) -> bytes:
    return b"offer" + encode_name(fixture_name) + domain + wrapped + root_pk


def make_bootstrap_offer(
    pairing_key: bytes, fixture_name: Name, domain: bytes, k_fix: bytes, pk_root: PublicKey
) -> BootstrapOffer:
    """Configuration-time pairing message; the pairing key is single use."""
    wrap_key, mac_key = _pairing_keys(pairing_key)
    # Zero nonce is safe only because each pairing key wraps one k_fix, once.
    wrapped = crypto.aes_ctr_encrypt(wrap_key, _ZERO_NONCE, k_fix)
    blob = crypto.serialize_public(pk_root)
    tag = crypto.mac(mac_key, _offer_mac_input(fixture_name, domain, wrapped, blob))
    return BootstrapOffer(fixture_name, domain, wrapped, blob, tag)


def confirm_bootstrap(offer: BootstrapOffer, accept: BootstrapAccept, pairing_key: bytes) -> bool:
    _, mac_key = _pairing_keys(pairing_key)
    return accept.fixture_name == offer.fixture_name and crypto.mac_verify(
        mac_key, b"accept" + encode_name(offer.fixture_name), accept.tag
    )


class FixtureState:
    """A light fixture: pairing state, replay table, policy, and the lamp itself.

    resolve_app, when given, maps an application name to its published
    KeyRecord and is only consulted for signature-kind authenticators.
    """

    def __init__(
        self,
        name: Name | None = None,
        k_fix: bytes | None = None,
        pk_root: PublicKey | None = None,
        domain: bytes | None = None,
        acl: Acl | None = None,
        registry: CommandRegistry = DEFAULT_REGISTRY,
        resolve_app=None,
    ):
        self.name = name
        self.k_fix = k_fix
        self.pk_root = pk_root
        self.domain = domain
        self.acl = acl
        self.registry = registry
        self.resolve_app = resolve_app
        self.light = LightState()
        self._seen: dict[Name, dict[int, int]] = {}  # app -> seq -> expiry (ms)

    # -- pairing --

    @property
    def bootstrapped(self) -> bool:
        return self.k_fix is not None

    def bootstrap(self, offer: BootstrapOffer, pairing_key: bytes) -> BootstrapAccept:
        if self.bootstrapped:
            raise AlreadyBootstrapped(f"{self.name} already holds a fixture key")
        wrap_key, mac_key = _pairing_keys(pairing_key)
        msg = _offer_mac_input(offer.fixture_name, offer.domain, offer.wrapped_key, offer.root_pk)
        if not crypto.mac_verify(mac_key, msg, offer.tag):
            raise PairingMacMismatch("bootstrap offer fails pairing MAC")
        self.name = offer.fixture_name
        self.domain = offer.domain
        self.k_fix = crypto.aes_ctr_decrypt(wrap_key, _ZERO_NONCE, offer.wrapped_key)
        self.pk_root = crypto.deserialize_public(offer.root_pk)
        return BootstrapAccept(
            fixture_name=self.name,
            tag=crypto.mac(mac_key, b"accept" + encode_name(self.name)),
        )

    # -- keys --

    def app_key(self, name_app: Name) -> bytes:
        if not self.bootstrapped:
            raise NotBootstrapped("fixture has no key yet")
        return derive_app_key(self.k_fix, name_app)

    # -- replay table --

    def evict_stale(self, now_ms: int) -> int:
        """Drop replay entries past retention; returns how many went."""
        dropped = 0
        for app, table in list(self._seen.items()):
            for seq, expiry in list(table.items()):
                if expiry <= now_ms:
                    del table[seq]
                    dropped += 1
            if not table:
                del self._seen[app]
        return dropped

    # -- the lamp --

    def apply_raw(self, cmd: bytes) -> dict:
        """Execute a verb with no checks at all; the unsecured baseline."""
        light = self.light
        if cmd == b"on":
            light.on = True
        elif cmd == b"off":
            light.on = False
        elif cmd == b"status":
            pass
        elif cmd.startswith(b"intensity/"):
            level = int(cmd[len(b"intensity/") :])
            if not 0 <= level <= 100:
                raise ValueError(f"intensity {level} outside 0..100")
            light.intensity = level
            light.on = level > 0
        elif cmd.startswith(b"color/"):
            value = cmd[len(b"color/") :].decode("ascii")
            if len(value) != 6 or any(c not in "0123456789abcdef" for c in value):
                raise ValueError("color must be 6 lowercase hex digits")
            light.color = value
        elif cmd.startswith(b"calibrate/"):
            key, _, val = cmd[len(b"calibrate/") :].partition(b"=")
            if not key:
                raise ValueError("calibrate needs key=value")
            light.calibration[key.decode("latin-1")] = val.decode("latin-1")
        else:
            raise ValueError(f"unknown verb {cmd!r}")
        return light.snapshot()

    # -- verification pipeline --

    def verify_command(self, name: Name, now_ms: int) -> CommandResult:
        """Structure, policy, ACL, freshness, replay, authenticator; in that order.

        Cheap structural and policy checks run before the (possibly
        expensive) authenticator so garbage costs little; over-claiming
        attributes changes k_app and dies at the authenticator anyway.
        """
        if not self.bootstrapped:
            raise NotBootstrapped("fixture has no key yet")
        try:
            name_app, cmd_comp, token_bytes = split_command_name(self.name, name)
            token = AuthToken.decode(token_bytes)
        except MalformedCommand as e:
            return CommandResult(False, "Malformed", str(e))

        k_app = derive_app_key(self.k_fix, name_app)
        cmd = cmd_comp
        if cmd_comp.startswith(ENC_MARK):
            cmd = decrypt_command(k_app, token.seq, cmd_comp)

        try:
            attrs = parse_attributes(name_app)
        except DanglingAttributeName as e:
            return CommandResult(False, "Malformed", str(e), name_app, cmd, token)
        verdict = evaluate_policy(
            attrs, self.acl, name_app, cmd, now_ms / 1000, self.registry, domain=self.domain
        )
        if not verdict:
            return CommandResult(False, verdict.reason, verdict.detail, name_app, cmd, token)

        window = staleness_window_ms(token.rtt_ms)
        if abs(now_ms - token.ts_ms) > window:
            return CommandResult(
                False, "Stale", f"token is {abs(now_ms - token.ts_ms)}ms off, window {window}ms",
                name_app, cmd, token,
            )

        table = self._seen.setdefault(name_app, {})
        for seq, expiry in list(table.items()):
            if expiry <= now_ms:
                del table[seq]
        if token.seq in table:
            return CommandResult(False, "SeqReplay", f"seq {token.seq} already seen", name_app, cmd, token)

        msg = command_auth_input(name[:-1], token)
        if token.auth_kind == KIND_MAC:
            authentic = crypto.mac_verify(k_app, msg, token.authenticator)
        else:
            authentic = self._verify_signature(name_app, msg, token.authenticator)
        if not authentic:
            return CommandResult(False, "BadAuthenticator", "authenticator does not verify", name_app, cmd, token)

        table[token.seq] = now_ms + REPLAY_RETENTION_MS
        try:
            status = self.apply_raw(cmd)
        except ValueError as e:
            return CommandResult(False, "Malformed", str(e), name_app, cmd, token)
        return CommandResult(True, "", "", name_app, cmd, token, status)

    def _verify_signature(self, name_app: Name, msg: bytes, sig: bytes) -> bool:
        if self.resolve_app is None or self.pk_root is None:
            return False
        record: KeyRecord | None = self.resolve_app(name_app)
        if record is None or record.namespace != name_app:
            return False
        try:
            if not crypto.verify_content(self.pk_root, record.carrier):
                return False
            return crypto.verify_raw(record.pk, msg, sig)
        except crypto.CryptoError:
            return False
