"""
Wire up one room by hand and drive a light through it
=====================================================

The smallest complete deployment: a trust root for the home, one
ceiling lamp behind a forwarder, and one wall panel.  Commands travel
as interest names that carry their own authentication token; the lamp
answers with a keyed ack that satisfies the same interest.  Run it and
read the wire log at the end, every packet is there.
"""

from lumen import crypto
from lumen.control import ACK_MAC, FixtureState
from lumen.entities import AppActor, AuthManager, ConfigManager, FixtureActor
from lumen.names import Name
from lumen.netsim import Host, Link, Router, Sim
from lumen.trust import TrustRoot

LAMP = Name.parse("/home/den/lamp")
PANEL = Name.parse("/apps/panel/access/actuate/expires/20380119000000Z")

# --- provisioning -----------------------------------------------------------
# The authorization manager owns /home and signs everything below it.
# Pairing hands the lamp its domain secret; the access list says what
# the panel may ask for.

sim = Sim(seed=1)
am = AuthManager(TrustRoot.create("/home", rng=sim.node_rng("root-key")))
cm = ConfigManager(sim.node_rng("cm"))

state = FixtureState(resolve_app=am.resolve)
cm.pair_fixture(state, LAMP, b"home", am.root.public)
state.acl = am.sign_acl(Name.parse("/home/acl"), [("/apps", ["on", "off", "intensity/*"])])

kp_lamp = crypto.generate_keypair(rng=sim.node_rng("lamp-key"))
record = am.publish(LAMP, kp_lamp.public)

# --- topology ---------------------------------------------------------------
# panel --1ms-- forwarder --2ms-- lamp

router = Router(sim, "r1", command_prefixes=(LAMP,))
panel_host = Host(sim, "panel")
lamp_host = Host(sim, "lamp")
to_panel = Link(sim, panel_host, router, delay_ms=1)
to_lamp = Link(sim, router, lamp_host, delay_ms=2)
router.add_route(LAMP, to_lamp.fa)
router.add_route(Name.parse("/apps"), to_panel.fb)

lamp = FixtureActor(sim, lamp_host, state, kp_lamp, record)
panel = AppActor(
    sim,
    panel_host,
    PANEL,
    pk_root=am.root.public,
    app_keys={LAMP: am.app_key_for(cm, PANEL, LAMP)},
    scheme=ACK_MAC,
)

# --- a short evening --------------------------------------------------------

panel.send_command(LAMP, b"on")
sim.at(40, panel.send_command, LAMP, b"intensity/35")
sim.at(80, panel.send_command, LAMP, b"off")
sim.run()

print("lamp state:", state.light.snapshot())
print("panel outcomes:", [(o.verb.decode(), "ok" if o.ok else "failed") for o in panel.history])
print("round trips:", [o.latency_ms for o in panel.history if o.ok], "ms")
print()
print("every packet on every wire:")
for line in sim.format_log():
    print(" ", line)
