"""Exit codes and output of the command line front end."""

import json
import pathlib
import subprocess

import pytest

from lumen.cli import main

SCENARIOS = pathlib.Path(__file__).resolve().parent.parent / "scenarios"


def test_run_reports_checks_and_exits_zero(capsys, tmp_path):
    log = tmp_path / "events.ndjson"
    rc = main(["run", str(SCENARIOS / "authenticated-10.json"), "--log", str(log)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "10/10 acked" in out
    assert "FAIL" not in out
    lines = log.read_text().splitlines()
    events = [json.loads(line) for line in lines]
    assert events[0]["time_ms"] == 0 and events[0]["dir"] == "out"
    assert all(e["name"].startswith("/") for e in events)


def test_run_seed_override_still_passes(capsys):
    assert main(["run", str(SCENARIOS / "authenticated-10.json"), "--seed", "99"]) == 0


def test_run_failed_assertion_exits_one(capsys, tmp_path):
    doc = {
        "name": "wrong",
        "seed": 1,
        "domain": "/dom",
        "fixtures": ["/dom/fix1"],
        "apps": [{"name": "/apps/a/access/full-access/expires/20380119000000Z"}],
        "workload": [{"at_ms": 0, "verb": "on"}],
        "assertions": {"executed": 99},
    }
    path = tmp_path / "wrong.json"
    path.write_text(json.dumps(doc))
    rc = main(["run", str(path)])
    out = capsys.readouterr().out
    assert rc == 1
    assert "FAIL executed" in out


def test_run_missing_file_exits_two(capsys):
    rc = main(["run", "/no/such/scenario.json"])
    err = capsys.readouterr().err
    assert rc == 2
    assert "error:" in err


def test_bench_writes_csv(capsys, tmp_path):
    csv_path = tmp_path / "bench.csv"
    rc = main(["bench", "--iters", "20", "--csv", str(csv_path)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "rsa_sign" in out and "mac_vs_signature" in out
    assert csv_path.exists() and "per_op_us" in csv_path.read_text()


def test_attack_suite_exits_zero(capsys):
    rc = main(["attack-suite"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "5/5 attacks held" in out


def test_console_script_is_installed():
    proc = subprocess.run(["lumen", "--help"], capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    for sub in ("run", "attack-suite", "bench", "gateway"):
        assert sub in proc.stdout
