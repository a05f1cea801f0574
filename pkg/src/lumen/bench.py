"""Microbenchmarks for the cryptography spent on each command.

Covers both authenticator families (signature and MAC), the three
sides of the encrypted-challenge ack, and hash-chain answering with
pebbles against recomputing every link from the seed.  Ratios between
the rows are what justify the scheme choices; bench_ratios exposes
the interesting ones by name.
"""

import csv
import random
import time
from dataclasses import dataclass

from . import crypto
from .ackauth import CHAIN_LEN, PEBBLE_SPACING, ChainVerifier, HashChain
from .ackauth import enc_challenge_new, enc_challenge_open

DEFAULT_ITERS = 1000


@dataclass
class BenchRow:
    op: str
    iters: int
    total_s: float

    @property
    def per_op_us(self) -> float:
        return self.total_s / self.iters * 1e6


def _timed(fn, iters: int) -> float:
    t0 = time.perf_counter()
    for _ in range(iters):
        fn()
    return time.perf_counter() - t0


def run_bench(iters: int = DEFAULT_ITERS, seed: int = 0) -> list[BenchRow]:
    rng = random.Random(seed)
    kp = crypto.generate_keypair(rng=rng)
    k_app = rng.randbytes(32)
    msg = rng.randbytes(64)
    sig = crypto.sign_raw(kp, msg)
    tag = crypto.mac(k_app, msg)
    x, params = enc_challenge_new(k_app, rng)
    z = params[16:]

    rows = [
        BenchRow("rsa_sign", iters, _timed(lambda: crypto.sign_raw(kp, msg), iters)),
        BenchRow("rsa_verify", iters, _timed(lambda: crypto.verify_raw(kp.public, msg, sig), iters)),
        BenchRow("hmac_create", iters, _timed(lambda: crypto.mac(k_app, msg), iters)),
        BenchRow("hmac_verify", iters, _timed(lambda: crypto.mac_verify(k_app, msg, tag), iters)),
        BenchRow(
            "enc_challenge_create", iters, _timed(lambda: enc_challenge_new(k_app, rng), iters)
        ),
        BenchRow(
            "enc_challenge_open", iters, _timed(lambda: enc_challenge_open(k_app, params), iters)
        ),
        BenchRow(
            "enc_challenge_check", iters, _timed(lambda: crypto.sha256(x) == z, iters)
        ),
    ]

    # Chain answers are lock-step, so these rows time one pass down a chain.
    n = min(iters, CHAIN_LEN)
    pebbled = HashChain(rng.randbytes(32), length=CHAIN_LEN, spacing=PEBBLE_SPACING)
    t0 = time.perf_counter()
    answers = [pebbled.answer(k) for k in range(1, n + 1)]
    rows.append(BenchRow("chain_answer_pebbled", n, time.perf_counter() - t0))

    # Keeping only the seed makes every answer walk most of the chain.
    m = max(1, min(iters, CHAIN_LEN) // 20)
    bare = HashChain(rng.randbytes(32), length=CHAIN_LEN, spacing=CHAIN_LEN)
    t0 = time.perf_counter()
    for k in range(1, m + 1):
        bare.answer(k)
    rows.append(BenchRow("chain_answer_recompute", m, time.perf_counter() - t0))

    verifier = ChainVerifier(pebbled.anchor, length=CHAIN_LEN)
    t0 = time.perf_counter()
    for k, w in enumerate(answers, start=1):
        verifier.accept(k, w)
    rows.append(BenchRow("chain_verify", n, time.perf_counter() - t0))
    assert verifier.index == n, "benchmark chain drifted out of step"
    return rows


def bench_ratios(rows: list[BenchRow]) -> dict[str, float]:
    """Speedups the measurements are expected to show, larger is faster."""
    per = {r.op: r.per_op_us for r in rows}
    signature_auth = per["rsa_sign"] + per["rsa_verify"]
    mac_auth = per["hmac_create"] + per["hmac_verify"]
    return {
        "mac_vs_signature": signature_auth / mac_auth,
        "pebbled_vs_recompute": per["chain_answer_recompute"] / per["chain_answer_pebbled"],
        "enc_create_vs_signature": per["rsa_sign"] / per["enc_challenge_create"],
        "enc_open_vs_signature": per["rsa_sign"] / per["enc_challenge_open"],
        "enc_check_vs_signature": per["rsa_sign"] / per["enc_challenge_check"],
    }


def write_csv(rows: list[BenchRow], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["op", "iters", "total_s", "per_op_us"])
        for r in rows:
            w.writerow([r.op, r.iters, f"{r.total_s:.6f}", f"{r.per_op_us:.3f}"])


def format_table(rows: list[BenchRow]) -> str:
    width = max(len(r.op) for r in rows)
    lines = [f"{'op':<{width}}  {'iters':>6}  {'per-op':>12}"]
    for r in rows:
        lines.append(f"{r.op:<{width}}  {r.iters:>6}  {r.per_op_us:>9.2f} us")
    return "\n".join(lines)
