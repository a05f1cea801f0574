"""The scripted adversary suite must hold, and not only for one seed."""

import pytest

from lumen.attacks import ATTACKS, _Check, altered_verb, run_adversary_suite


@pytest.mark.parametrize("attack", ATTACKS, ids=lambda a: a.__name__)
def test_attack_verdicts_hold(attack):
    r = attack(seed=0)
    assert r.passed, r.detail


def test_suite_covers_every_attack_under_other_seeds():
    reports = run_adversary_suite(seed=5)
    assert [r.name for r in reports] == [
        "tampered-command",
        "replayed-command",
        "delayed-command",
        "forged-ack",
        "altered-verb",
    ]
    assert all(r.passed for r in reports), [r.detail for r in reports if not r.passed]


def test_altered_verb_scales_down():
    r = altered_verb(seed=1, rounds=3)
    assert r.passed and "3 mutations" in r.detail


def test_failed_expectations_show_up_in_the_report():
    c = _Check()
    c.expect(True, "fine")
    c.expect(False, "first problem")
    c.expect(False, "second problem")
    r = c.report("example", "all good")
    assert not r.passed
    assert r.detail == "first problem; second problem"
    assert r.problems == ["first problem", "second problem"]
