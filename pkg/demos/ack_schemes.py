"""
What an acknowledgment costs under each scheme
==============================================

The same ten-command workload runs four times, once per ack scheme,
and the table at the end shows where the work went.  Signed acks make
the fixture do public-key work per command; MACs drop that to two
symmetric operations; encrypted challenges keep MAC cost but let the
forwarder judge acks without keys; hash chains answer with one or two
hashes from a pebbled chain.
"""

from lumen.scenario import run_scenario

WORKLOAD = [
    {"at_ms": 200 * i, "verb": verb}
    for i, verb in enumerate(
        ["on", "intensity/20", "intensity/40", "intensity/60", "intensity/80",
         "color/ff8800", "intensity/100", "status", "intensity/10", "off"]
    )
]


def run(scheme: str):
    return run_scenario(
        {
            "v": 1,
            "name": f"acks-{scheme}",
            "seed": 9,
            "domain": "/dom",
            "fixtures": ["/dom/fix1"],
            "apps": [
                {
                    "name": "/apps/a/access/full-access/expires/20380119000000Z",
                    "scheme": scheme,
                }
            ],
            "workload": WORKLOAD,
        }
    )


# --- run all four -----------------------------------------------------------

print(f"{'scheme':<6} {'acked':>5} {'sign':>5} {'verify':>6} {'mac':>5} "
      f"{'fix hashes':>10} {'app hashes':>10}")
for scheme in ("sig", "mac", "enc", "chain"):
    m = run(scheme).metrics
    ops = m.crypto_ops
    print(
        f"{scheme:<6} {m.commands_acked:>5} {ops.get('sign', 0):>5} "
        f"{ops.get('verify', 0):>6} {ops.get('mac', 0):>5} "
        f"{m.chain_hashes_fixture:>10} {m.chain_hashes_app:>10}"
    )

# The sign column under "sig" counts one per command plus provisioning;
# under the symmetric schemes it is provisioning only (key records, the
# access list, anchor certificates).  Chain hash columns show the
# pebbled fixture answering for ~50 hashes while the verifier spends
# one hash per accepted link.
