import pathlib
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lumen import control, crypto
from lumen.control import (
    ACK_CHAIN,
    ACK_ENC,
    ACK_MAC,
    ACK_SIG,
    KIND_MAC,
    KIND_SIG,
    AlreadyBootstrapped,
    AuthToken,
    FixtureState,
    MalformedCommand,
    NotBootstrapped,
    PairingMacMismatch,
    assemble_command_name,
    build_command,
    confirm_bootstrap,
    derive_app_key,
    decrypt_command,
    encrypt_command,
    make_bootstrap_offer,
    make_token,
    split_command_name,
    staleness_window_ms,
    unwrap_app_key,
    wrap_app_key,
)
from lumen.names import Name
from lumen.packets import encode_name
from lumen.trust import TrustRoot, build_acl, publish_key

VECTORS = pathlib.Path(__file__).resolve().parent.parent / "vectors"

K_FIX = bytes(range(32))
NOW = 1_700_000_000_000  # ms

FIX = Name.parse("/dom/theater/fix7")
APP = Name.parse("/apps/panel/access/full-access/expires/20380119000000Z")
APP_RO = Name.parse("/apps/viewer/access/read-only/expires/20380119000000Z")
APP_EXPIRED = Name.parse("/apps/old/access/full-access/expires/20100101000000Z")


@pytest.fixture(scope="module")
def root():
    return TrustRoot.create("/dom")


@pytest.fixture(scope="module")
def rsa_kp():
    return crypto.generate_keypair()


def make_fixture(root, acl_cmds=("on", "off", "status", "intensity/*", "color/*", "calibrate/*"), resolve=None):
    acl = build_acl(root, Name.parse("/dom/acl"), [("/apps", list(acl_cmds))])
    return FixtureState(name=FIX, k_fix=K_FIX, pk_root=root.public, acl=acl, resolve_app=resolve)


def cmd_name(cmd=b"on", name_app=APP, seq=1, now_ms=NOW, **kw):
    k_app = derive_app_key(K_FIX, name_app)
    return build_command(FIX, name_app, cmd, seq=seq, now_ms=now_ms, k_app=k_app, **kw)


# --- token codec ------------------------------------------------------------


def test_token_golden_vector():
    expected = bytes.fromhex((VECTORS / "token_mac.hex").read_text().strip())
    token = AuthToken(
        seq=0x0102030405060708,
        ts_sec=1_600_000_000,
        ts_usec=250_000,
        rtt_ms=120,
        ack_scheme=ACK_MAC,
        auth_kind=KIND_MAC,
        authenticator=b"\xab" * 32,
    )
    # Independent layout oracle: fixed-width big-endian fields in order.
    by_hand = (
        (0x0102030405060708).to_bytes(8, "big")
        + (1_600_000_000).to_bytes(4, "big")
        + (250_000).to_bytes(4, "big")
        + (120).to_bytes(4, "big")
        + bytes([ACK_MAC, KIND_MAC])
        + b"\xab" * 32
    )
    assert token.encode() == by_hand == expected
    assert AuthToken.decode(expected) == token
    assert token.ts_ms == 1_600_000_000_250


def test_token_scheme_params_round_trip():
    for scheme, plen in ((ACK_SIG, 0), (ACK_MAC, 0), (ACK_ENC, 48), (ACK_CHAIN, 32)):
        t = AuthToken(5, 6, 7, 8, scheme, bytes(plen), KIND_SIG, b"\x01sig")
        assert AuthToken.decode(t.encode()) == t


def test_token_decode_rejects_malformed():
    good = AuthToken(1, 2, 3, 4, ACK_ENC, bytes(48), KIND_MAC, b"\xcd" * 32).encode()
    assert AuthToken.decode(good)
    for cut in range(len(good)):
        data = good[:cut]
        if data == good:
            continue
        with pytest.raises(MalformedCommand):
            AuthToken.decode(data)
    with pytest.raises(MalformedCommand):
        AuthToken.decode(good[:20] + b"\x7f" + good[21:])  # unknown scheme
    bad_kind = bytearray(good)
    bad_kind[20 + 1 + 48] = 0x09
    with pytest.raises(MalformedCommand):
        AuthToken.decode(bytes(bad_kind))
    with pytest.raises(MalformedCommand):
        AuthToken.decode(AuthToken(1, 2, 999_999, 4, ACK_SIG, b"", KIND_MAC, b"\0" * 32).encode()[:8] + (1_000_000).to_bytes(4, "big") + b"")
    # microseconds field holds values below one million only
    raw = bytearray(AuthToken(1, 2, 3, 4, ACK_SIG, b"", KIND_MAC, b"\0" * 32).encode())
    raw[12:16] = (1_000_000).to_bytes(4, "big")
    with pytest.raises(MalformedCommand):
        AuthToken.decode(bytes(raw))
    with pytest.raises(MalformedCommand):
        AuthToken.decode(AuthToken(1, 2, 3, 4, ACK_SIG, b"", KIND_MAC, b"\0" * 31).encode())


@settings(max_examples=120)
@given(
    seq=st.integers(0, 2**64 - 1),
    ts_sec=st.integers(0, 2**32 - 1),
    ts_usec=st.integers(0, 999_999),
    rtt=st.integers(0, 2**32 - 1),
    scheme=st.sampled_from([ACK_SIG, ACK_MAC, ACK_ENC, ACK_CHAIN]),
    kind_sig=st.booleans(),
    blob=st.binary(min_size=1, max_size=160),
)
def test_token_round_trip_property(seq, ts_sec, ts_usec, rtt, scheme, kind_sig, blob):
    params = bytes(control.SCHEME_PARAM_LEN[scheme])
    auth = blob if kind_sig else b"\x55" * 32
    t = AuthToken(seq, ts_sec, ts_usec, rtt, scheme, params, KIND_SIG if kind_sig else KIND_MAC, auth)
    assert AuthToken.decode(t.encode()) == t


def test_make_token_validates_param_length():
    with pytest.raises(MalformedCommand):
        make_token(seq=1, now_ms=0, ack_scheme=ACK_ENC, ack_params=b"short")


# --- command names ----------------------------------------------------------


def test_assemble_split_round_trip():
    token = b"\x00" * 54
    name = assemble_command_name(FIX, APP, b"on", token)
    assert name[len(FIX)] == bytes([len(APP)])
    app, cmd, tok = split_command_name(FIX, name)
    assert (app, cmd, tok) == (APP, b"on", token)


@settings(max_examples=100)
@given(
    fix=st.lists(st.binary(min_size=1, max_size=12), min_size=0, max_size=3),
    app=st.lists(st.binary(min_size=1, max_size=12), min_size=1, max_size=5),
    cmd=st.binary(min_size=1, max_size=12),
    token=st.binary(min_size=1, max_size=60),
)
def test_split_round_trip_property(fix, app, cmd, token):
    name_fix, name_app = Name(fix), Name(app)
    name = assemble_command_name(name_fix, name_app, cmd, token)
    assert split_command_name(name_fix, name) == (name_app, cmd, token)


def test_split_rejects_malformed():
    token = b"\x00" * 54
    good = assemble_command_name(FIX, APP, b"on", token)
    with pytest.raises(MalformedCommand):
        split_command_name(Name.parse("/other"), good)
    with pytest.raises(MalformedCommand):  # two-byte count component
        split_command_name(FIX, Name(FIX.components + (b"\x02\x02", b"a", b"b", b"on", token)))
    with pytest.raises(MalformedCommand):  # zero count
        split_command_name(FIX, Name(FIX.components + (b"\x00", b"a", b"on", token)))
    with pytest.raises(MalformedCommand):  # count exceeds what is present
        split_command_name(FIX, Name(FIX.components + (b"\x05", b"a", b"on", token)))
    with pytest.raises(MalformedCommand):  # token missing
        split_command_name(FIX, Name(FIX.components + (b"\x01", b"a", b"on")))
    with pytest.raises(MalformedCommand):
        split_command_name(FIX, FIX)


def test_assemble_rejects_empty_app_name():
    with pytest.raises(MalformedCommand):
        assemble_command_name(FIX, Name(()), b"on", b"t")


# --- key derivation ---------------------------------------------------------


def test_derive_app_key_golden_vector():
    expected = bytes.fromhex((VECTORS / "app_key.hex").read_text().strip())
    assert derive_app_key(b"\x01" * 32, Name.parse("/dom/app1")) == expected
    # Independent oracle: plain HMAC-SHA256 over the canonical name bytes.
    import hashlib, hmac

    oracle = hmac.new(b"\x01" * 32, encode_name(Name.parse("/dom/app1")), hashlib.sha256).digest()
    assert expected == oracle


def test_app_key_binds_full_name():
    k1 = derive_app_key(K_FIX, APP)
    k2 = derive_app_key(K_FIX, APP_RO)
    widened = Name(APP.components[:-1] + (b"99991231235959Z",))
    assert k1 != k2 and derive_app_key(K_FIX, widened) != k1


def test_wrap_unwrap_app_key(rsa_kp):
    k_app = derive_app_key(K_FIX, APP)
    blob = wrap_app_key(rsa_kp.public, k_app)
    assert blob != k_app and unwrap_app_key(rsa_kp, blob) == k_app


# --- verification pipeline --------------------------------------------------


def test_mac_command_accepted_and_applied(root):
    fx = make_fixture(root)
    assert fx.verify_command(cmd_name(b"on"), NOW).ok
    assert fx.light.on
    res = fx.verify_command(cmd_name(b"intensity/63", seq=2), NOW)
    assert res.ok and fx.light.intensity == 63 and res.status["intensity"] == 63
    assert fx.verify_command(cmd_name(b"off", seq=3), NOW).ok
    assert not fx.light.on
    res = fx.verify_command(cmd_name(b"color/ff8800", seq=4), NOW)
    assert res.ok and fx.light.color == "ff8800"


def test_read_only_key_may_query_but_not_actuate(root):
    fx = make_fixture(root)
    res = fx.verify_command(cmd_name(b"status", name_app=APP_RO), NOW)
    assert res.ok and res.status == fx.light.snapshot()
    res = fx.verify_command(cmd_name(b"on", name_app=APP_RO, seq=2), NOW)
    assert not res.ok and res.reason == "PolicyDenied"


def test_all_denial_reasons(root):
    fx = make_fixture(root, acl_cmds=("on", "off", "status", "intensity/*"))

    garbage = Name(FIX.components + (b"\x01", b"a", b"on", b"junk"))
    assert fx.verify_command(garbage, NOW).reason == "Malformed"

    assert fx.verify_command(cmd_name(b"on", name_app=APP_EXPIRED), NOW).reason == "Expired"
    assert fx.verify_command(cmd_name(b"on", name_app=APP_RO), NOW).reason == "PolicyDenied"
    assert fx.verify_command(cmd_name(b"color/ff0000"), NOW).reason == "AclDenied"
    assert fx.verify_command(cmd_name(b"on", now_ms=NOW - 5000), NOW).reason == "Stale"

    assert fx.verify_command(cmd_name(b"on", seq=9), NOW).ok
    assert fx.verify_command(cmd_name(b"on", seq=9), NOW).reason == "SeqReplay"

    name = cmd_name(b"on", seq=10)
    flipped = Name(name.components[:-1] + (name[-1][:-1] + bytes([name[-1][-1] ^ 1]),))
    assert fx.verify_command(flipped, NOW).reason == "BadAuthenticator"


def test_denial_precedence(root):
    fx = make_fixture(root)
    # Policy runs before freshness: a read-only key sending a stale actuation
    # is reported as the policy problem.
    res = fx.verify_command(cmd_name(b"on", name_app=APP_RO, now_ms=NOW - 10_000), NOW)
    assert res.reason == "PolicyDenied"
    # Freshness runs before the authenticator.
    name = cmd_name(b"on", now_ms=NOW - 10_000)
    flipped = Name(name.components[:-1] + (name[-1][:-1] + bytes([name[-1][-1] ^ 1]),))
    assert fx.verify_command(flipped, NOW).reason == "Stale"


def test_wrong_k_app_is_bad_authenticator(root):
    fx = make_fixture(root)
    name = build_command(FIX, APP, b"on", seq=1, now_ms=NOW, k_app=b"\x13" * 32)
    assert fx.verify_command(name, NOW).reason == "BadAuthenticator"


def test_over_claiming_attributes_breaks_mac(root):
    # The app holds the key for its read-only name; rewriting the name to
    # claim full access derives a different k_app at the fixture.
    fx = make_fixture(root)
    k_ro = derive_app_key(K_FIX, APP_RO)
    claimed = Name.parse("/apps/viewer/access/full-access/expires/20380119000000Z")
    name = build_command(FIX, claimed, b"on", seq=1, now_ms=NOW, k_app=k_ro)
    assert fx.verify_command(name, NOW).reason == "BadAuthenticator"


def test_staleness_window_formula():
    assert staleness_window_ms(0) == 1000
    assert staleness_window_ms(100) == 1000  # floor dominates small RTTs
    assert staleness_window_ms(250) == 1000
    assert staleness_window_ms(251) == 1002
    assert staleness_window_ms(400) == 1300
    assert staleness_window_ms(10**6) == 30_000  # capped below replay retention


def test_staleness_boundaries(root):
    fx = make_fixture(root)
    assert fx.verify_command(cmd_name(b"on", seq=1, now_ms=NOW - 1000), NOW).ok
    assert fx.verify_command(cmd_name(b"on", seq=2, now_ms=NOW - 1001), NOW).reason == "Stale"
    assert fx.verify_command(cmd_name(b"on", seq=3, now_ms=NOW - 1300, rtt_ms=400), NOW).ok
    assert fx.verify_command(cmd_name(b"on", seq=4, now_ms=NOW - 1301, rtt_ms=400), NOW).reason == "Stale"
    # Future-dated tokens are just as stale.
    assert fx.verify_command(cmd_name(b"on", seq=5, now_ms=NOW + 1301, rtt_ms=400), NOW).reason == "Stale"


def test_replay_entry_eviction(root):
    fx = make_fixture(root)
    assert fx.verify_command(cmd_name(b"on", seq=7), NOW).ok
    assert fx.evict_stale(NOW + 59_999) == 0
    assert fx.evict_stale(NOW + 60_000) == 1
    # A verbatim replay is stale long before its table entry could matter.
    assert fx.verify_command(cmd_name(b"on", seq=7), NOW + 60_000).reason == "Stale"
    # A fresh token may deliberately reuse the evicted sequence number.
    later = NOW + 61_000
    assert fx.verify_command(cmd_name(b"on", seq=7, now_ms=later), later).ok


def test_replay_purge_inside_verify(root):
    fx = make_fixture(root)
    assert fx.verify_command(cmd_name(b"on", seq=3), NOW).ok
    later = NOW + 61_000
    assert fx.verify_command(cmd_name(b"on", seq=3, now_ms=later), later).ok


def test_bad_argument_is_malformed(root):
    fx = make_fixture(root)
    assert fx.verify_command(cmd_name(b"intensity/999"), NOW).reason == "Malformed"
    assert fx.verify_command(cmd_name(b"color/red", seq=2), NOW).reason == "Malformed"


def test_unregistered_verb_denied(root):
    fx = make_fixture(root)
    assert fx.verify_command(cmd_name(b"strobe"), NOW).reason == "PolicyDenied"


def test_not_bootstrapped_raises():
    fx = FixtureState()
    with pytest.raises(NotBootstrapped):
        fx.verify_command(Name.parse("/x"), NOW)
    with pytest.raises(NotBootstrapped):
        fx.app_key(APP)


def test_encrypted_command(root):
    fx = make_fixture(root)
    k_app = derive_app_key(K_FIX, APP)
    name = build_command(FIX, APP, b"intensity/40", seq=1, now_ms=NOW, k_app=k_app, encrypt=True)
    _, cmd_comp, _ = split_command_name(FIX, name)
    assert cmd_comp.startswith(b"\x00") and b"intensity" not in cmd_comp
    res = fx.verify_command(name, NOW)
    assert res.ok and res.cmd == b"intensity/40" and fx.light.intensity == 40
    assert decrypt_command(k_app, 1, encrypt_command(k_app, 1, b"on")) == b"on"


def test_signature_kind_command(root, rsa_kp):
    record = publish_key(root, APP, rsa_kp.public)
    fx = make_fixture(root, resolve={APP: record}.get)
    name = build_command(FIX, APP, b"on", seq=1, now_ms=NOW, keypair=rsa_kp)
    res = fx.verify_command(name, NOW)
    assert res.ok and res.token.auth_kind == KIND_SIG
    fresh = build_command(FIX, APP, b"on", seq=2, now_ms=NOW, keypair=rsa_kp)
    flipped = Name(fresh.components[:-1] + (fresh[-1][:-1] + bytes([fresh[-1][-1] ^ 1]),))
    assert fx.verify_command(flipped, NOW).reason == "BadAuthenticator"


def test_signature_kind_needs_resolvable_key(root, rsa_kp):
    fx = make_fixture(root, resolve=lambda _n: None)
    name = build_command(FIX, APP, b"on", seq=1, now_ms=NOW, keypair=rsa_kp)
    assert fx.verify_command(name, NOW).reason == "BadAuthenticator"


def test_mutating_any_component_never_verifies(root):
    # Authenticator binds the whole name: flip one byte anywhere and the
    # command must not execute.
    fx = make_fixture(root)
    rng = random.Random(8)
    for trial in range(60):
        name = cmd_name(b"intensity/50", seq=100 + trial)
        idx = rng.randrange(len(name))
        comp = bytearray(name[idx])
        comp[rng.randrange(len(comp))] ^= 1 << rng.randrange(8)
        mutated = Name(name.components[:idx] + (bytes(comp),) + name.components[idx + 1 :])
        if mutated == name:
            continue
        assert not fx.verify_command(mutated, NOW).ok


# --- bootstrap --------------------------------------------------------------


def test_bootstrap_transcript(root):
    pairing = b"factory-pairing-0001"
    offer = make_bootstrap_offer(pairing, FIX, b"stage", K_FIX, root.public)
    fx = FixtureState()
    accept = fx.bootstrap(offer, pairing)
    assert fx.bootstrapped and fx.k_fix == K_FIX and fx.name == FIX
    assert fx.domain == b"stage" and fx.pk_root == root.public
    assert confirm_bootstrap(offer, accept, pairing)
    assert not confirm_bootstrap(offer, accept, b"wrong")


def test_bootstrap_rejects_bad_mac(root):
    pairing = b"factory-pairing-0002"
    offer = make_bootstrap_offer(pairing, FIX, b"stage", K_FIX, root.public)
    fx = FixtureState()
    with pytest.raises(PairingMacMismatch):
        fx.bootstrap(offer, b"not-the-pairing-key")
    import dataclasses

    tampered = dataclasses.replace(offer, domain=b"lobby")
    with pytest.raises(PairingMacMismatch):
        fx.bootstrap(tampered, pairing)
    assert not fx.bootstrapped


def test_bootstrap_is_single_shot(root):
    pairing = b"factory-pairing-0003"
    offer = make_bootstrap_offer(pairing, FIX, b"stage", K_FIX, root.public)
    fx = FixtureState()
    fx.bootstrap(offer, pairing)
    with pytest.raises(AlreadyBootstrapped):
        fx.bootstrap(offer, pairing)


def test_bootstrapped_fixture_verifies_commands(root):
    pairing = b"factory-pairing-0004"
    offer = make_bootstrap_offer(pairing, FIX, b"stage", K_FIX, root.public)
    fx = FixtureState()
    fx.bootstrap(offer, pairing)
    assert fx.verify_command(cmd_name(b"on"), NOW).ok
