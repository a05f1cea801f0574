"""Scripted attacks against the command channel, with expected verdicts.

Each attack stands up a one-app, one-fixture deployment, lets an
on-path adversary interfere according to a fixed script, and checks
that every hostile packet was rejected for the right reason while
honest traffic still went through.  run_adversary_suite returns one
report per attack and passes only if all of them hold.
"""

from dataclasses import dataclass, field

from . import crypto
from .control import ACK_ENC, ACK_MAC, FixtureState, build_command
from .entities import AppActor, AuthManager, ConfigManager, FixtureActor
from .names import Name
from .netsim import Adversary, Host, Link, Router, Rule, Sim
from .packets import ContentObject
from .trust import TrustRoot

FIX = Name.parse("/dom/stage/fix1")
APP = Name.parse("/apps/console/access/full-access/expires/20380119000000Z")

ACL_CMDS = ("on", "off", "status", "intensity/*", "color/*")


@dataclass
class AttackReport:
    name: str
    passed: bool
    detail: str = ""
    problems: list = field(default_factory=list)


class _Check:
    """Collects expectation failures instead of raising on the first one."""

    def __init__(self):
        self.problems: list[str] = []

    def expect(self, ok: bool, msg: str) -> None:
        if not ok:
            self.problems.append(msg)

    def report(self, name: str, summary: str) -> AttackReport:
        if self.problems:
            return AttackReport(name, False, "; ".join(self.problems), self.problems)
        return AttackReport(name, True, summary)


def _domain(seed, *, scheme=ACK_MAC, adversary=None, cs_capacity=0, ack_cache=0):
    """App --1ms-- router --2ms-- fixture; the adversary owns the fixture link."""
    sim = Sim(seed)
    am = AuthManager(TrustRoot.create("/dom", rng=sim.node_rng("root-key")))
    cm = ConfigManager(sim.node_rng("cm"))

    state = FixtureState(resolve_app=am.resolve)
    cm.pair_fixture(state, FIX, b"dom", am.root.public)
    state.acl = am.sign_acl(Name.parse("/dom/acl"), [("/apps", list(ACL_CMDS))])

    kp_fix = crypto.generate_keypair(rng=sim.node_rng("fix-key"))
    record = am.publish(FIX, kp_fix.public)

    router = Router(sim, "r1", cs_capacity=cs_capacity, command_prefixes=(FIX,))
    app_host = Host(sim, "app")
    fix_host = Host(sim, "fix")
    to_app = Link(sim, app_host, router, delay_ms=1)
    to_fix = Link(sim, router, fix_host, delay_ms=2, adversary=adversary)
    router.add_route(FIX, to_fix.fa)
    router.add_route(Name.parse("/apps"), to_app.fb)

    fixture = FixtureActor(sim, fix_host, state, kp_fix, record, ack_cache_size=ack_cache)
    app = AppActor(
        sim,
        app_host,
        APP,
        pk_root=am.root.public,
        app_keys={FIX: am.app_key_for(cm, APP, FIX)},
        scheme=scheme,
        fallback=False,
    )
    return sim, app, fixture, router, to_fix


# --- the attacks ------------------------------------------------------------


def tampered_command(seed: int = 0) -> AttackReport:
    """Flip one bit of every command in flight.

    The flipped bit lands in the authenticator, so each attempt must
    die with BadAuthenticator and the light must not move.
    """
    adv = Adversary([Rule("modify", pkt_type="interest", prefix=FIX)])
    sim, app, fixture, router, _ = _domain(1000 + seed, adversary=adv)
    app.send_command(FIX, b"on")
    sim.run()

    c = _Check()
    c.expect(fixture.executed == 0, f"executed {fixture.executed} tampered commands")
    c.expect(not fixture.state.light.on, "light turned on from a tampered command")
    c.expect(
        dict(fixture.denials) == {"BadAuthenticator": 3},
        f"denials {dict(fixture.denials)}, wanted BadAuthenticator x3",
    )
    c.expect(app.stats["failures"] == 1, "app should report the command as failed")
    c.expect(app.stats["acks_ok"] == 0, "no tampered attempt may be acknowledged")
    return c.report("tampered-command", "3 attempts rejected BadAuthenticator, 0 executed")


def replayed_command(seed: int = 0) -> AttackReport:
    """Record honest commands, replay them twice: soon after, and a minute later.

    The content store and ack cache are disabled so every replay reaches
    the verification pipeline.  Fresh replays must fall to the sequence
    ledger, minute-old ones to the staleness window; none may execute.
    """
    adv = Adversary(
        [
            Rule("record", pkt_type="interest", prefix=FIX),
            Rule("replay", pkt_type="interest", prefix=FIX, at_ms=700),
            Rule("replay", pkt_type="interest", prefix=FIX, at_ms=61_000),
        ]
    )
    sim, app, fixture, router, _ = _domain(2000 + seed, adversary=adv)
    for i in range(5):
        sim.at(100 * i, app.send_command, FIX, b"intensity/%d" % (10 * i + 10))
    sim.run()

    c = _Check()
    c.expect(fixture.executed == 5, f"executed {fixture.executed}, wanted the 5 honest ones")
    c.expect(app.stats["acks_ok"] == 5, "honest commands should all be acknowledged")
    c.expect(
        dict(fixture.denials) == {"SeqReplay": 5, "Stale": 5},
        f"denials {dict(fixture.denials)}, wanted SeqReplay x5 + Stale x5",
    )
    c.expect(fixture.state.light.intensity == 50, "replays must not move the light")
    return c.report("replayed-command", "10 replays rejected (5 SeqReplay, 5 Stale), 5 executed")


def delayed_command(seed: int = 0) -> AttackReport:
    """Hold every command for 31 seconds before delivering it.

    Held commands arrive outside the staleness window and must be
    rejected, even though their authenticators are genuine.
    """
    adv = Adversary([Rule("delay", pkt_type="interest", prefix=FIX, delay_ms=31_000)])
    sim, app, fixture, router, _ = _domain(3000 + seed, adversary=adv)
    app.send_command(FIX, b"on")
    sim.run()

    c = _Check()
    c.expect(fixture.executed == 0, f"executed {fixture.executed} stale commands")
    c.expect(
        dict(fixture.denials) == {"Stale": 3},
        f"denials {dict(fixture.denials)}, wanted Stale x3",
    )
    c.expect(app.stats["failures"] == 1, "app should report the command as failed")
    return c.report("delayed-command", "3 delayed attempts rejected Stale, 0 executed")


def forged_ack(seed: int = 0) -> AttackReport:
    """Suppress the genuine ack and answer with a forged one instead.

    The command requests an encrypted-challenge ack, so the forwarder
    itself can check the preimage and must drop the forgery without a
    key; the app must never see a positive confirmation.
    """
    adv = Adversary(
        [
            Rule("record", pkt_type="interest", prefix=FIX),
            Rule("drop", pkt_type="content", prefix=FIX, count=3),
        ]
    )
    sim, app, fixture, router, link = _domain(4000 + seed, scheme=ACK_ENC, adversary=adv)

    def inject_forgery():
        if not adv.recorded:
            return
        _, interest = adv.recorded[0]
        fake = ContentObject(
            name=interest.name,
            payload=bytes([ACK_ENC]) + bytes(16) + bytes(32) + b"{}",
        )
        link.inject("ba", fake)

    app.send_command(FIX, b"intensity/75")
    sim.at(20, inject_forgery)
    sim.run()

    c = _Check()
    c.expect(router.dropped_acks == 1, f"router dropped {router.dropped_acks} acks, wanted 1")
    c.expect(app.stats["acks_ok"] == 0, "a forged ack must never count as confirmation")
    c.expect(app.stats["acks_bad"] == 0, "the forgery should die at the forwarder, not the app")
    c.expect(app.stats["failures"] == 1, "with every ack suppressed the command must fail")
    c.expect(fixture.executed == 1, "the honest command itself still executes once")
    return c.report("forged-ack", "forgery dropped in the network, no false confirmation")


def altered_verb(seed: int = 0, rounds: int = 100) -> AttackReport:
    """Rewrite the verb of authentic commands into a different valid verb.

    Each mutation still parses and still satisfies policy, so it must
    get all the way to the authenticator check and die there.
    """
    import random

    rng = random.Random(seed)
    am = AuthManager(TrustRoot.create("/dom", rng=rng))
    cm = ConfigManager(rng)
    state = FixtureState(resolve_app=am.resolve)
    cm.pair_fixture(state, FIX, b"dom", am.root.public)
    state.acl = am.sign_acl(Name.parse("/dom/acl"), [("/apps", list(ACL_CMDS))])
    k_app = am.app_key_for(cm, APP, FIX)

    c = _Check()
    rejected = 0
    for i in range(rounds):
        verb = b"intensity/%d" % rng.randrange(10, 100)
        name = build_command(
            FIX, APP, verb, seq=i, now_ms=1000, rtt_ms=50,
            ack_scheme=ACK_MAC, ack_params=b"", k_app=k_app,
        )
        comps = name.components
        bent = comps[-2][:-1] + bytes([comps[-2][-1] ^ 0x01])  # one digit off
        mutated = Name(comps[:-2] + (bent, comps[-1]))
        res = state.verify_command(mutated, now_ms=1005)
        c.expect(not res.ok, f"round {i}: mutated verb {bent!r} executed")
        c.expect(
            res.reason == "BadAuthenticator",
            f"round {i}: rejected as {res.reason}, wanted BadAuthenticator",
        )
        rejected += not res.ok
    honest = build_command(
        FIX, APP, b"intensity/42", seq=rounds, now_ms=1000, rtt_ms=50,
        ack_scheme=ACK_MAC, ack_params=b"", k_app=k_app,
    )
    res = state.verify_command(honest, now_ms=1005)
    c.expect(res.ok, f"honest control command rejected: {res.reason}")
    c.expect(state.light.intensity == 42, "honest control command should set the light")
    return c.report("altered-verb", f"{rejected} mutations rejected BadAuthenticator, honest control ran")


ATTACKS = (tampered_command, replayed_command, delayed_command, forged_ack, altered_verb)


def run_adversary_suite(seed: int = 0) -> list[AttackReport]:
    return [attack(seed) for attack in ATTACKS]
