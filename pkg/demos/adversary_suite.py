"""
Five ways to attack the command channel, all of which must fail
===============================================================

Each attack gives an on-path adversary full control of the fixture's
link: flipping bits, replaying recordings, delaying delivery, forging
acks, rewriting verbs.  The framework's job is to reject every hostile
packet for the right reason while honest traffic keeps flowing; the
suite checks exactly that and prints one line per attack.
"""

from lumen.attacks import run_adversary_suite

reports = run_adversary_suite(seed=0)
for rep in reports:
    print(f"{'held ' if rep.passed else 'BROKE'}  {rep.name:<18} {rep.detail}")

held = sum(r.passed for r in reports)
print()
print(f"{held}/{len(reports)} attacks held off")
