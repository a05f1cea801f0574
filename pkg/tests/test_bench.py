"""Benchmark plumbing and the speedups the scheme choices rest on.

The ratio thresholds here are order-of-magnitude claims, far below
what the operations actually show, so they hold on slow machines too.
"""

import csv

from lumen.bench import BenchRow, bench_ratios, format_table, run_bench, write_csv

EXPECTED_OPS = {
    "rsa_sign",
    "rsa_verify",
    "hmac_create",
    "hmac_verify",
    "enc_challenge_create",
    "enc_challenge_open",
    "enc_challenge_check",
    "chain_answer_pebbled",
    "chain_answer_recompute",
    "chain_verify",
}


def test_rows_cover_every_operation():
    rows = run_bench(iters=50)
    assert {r.op for r in rows} == EXPECTED_OPS
    assert all(r.total_s > 0 and r.per_op_us > 0 for r in rows)


def test_ratios_support_the_scheme_choices():
    ratios = bench_ratios(run_bench(iters=200))
    assert ratios["mac_vs_signature"] >= 10
    assert ratios["pebbled_vs_recompute"] >= 10
    assert ratios["enc_create_vs_signature"] > 1
    assert ratios["enc_open_vs_signature"] > 1
    assert ratios["enc_check_vs_signature"] > 1


def test_csv_round_trips(tmp_path):
    rows = run_bench(iters=20)
    out = tmp_path / "bench.csv"
    write_csv(rows, out)
    with open(out, newline="") as f:
        read = list(csv.DictReader(f))
    assert [r["op"] for r in read] == [r.op for r in rows]
    assert all(float(r["per_op_us"]) > 0 for r in read)


def test_table_lists_one_line_per_row():
    rows = [BenchRow("alpha", 10, 0.001), BenchRow("beta", 10, 0.002)]
    table = format_table(rows)
    assert len(table.splitlines()) == 3
    assert "alpha" in table and "beta" in table
