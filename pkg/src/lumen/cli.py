"""Command line front end: scenario runs, the attack suite, benchmarks, gateway."""

import argparse
import json
import sys
from dataclasses import replace

from .scenario import ConfigError


def _cmd_run(args) -> int:
    from .scenario import load_scenario, run_scenario

    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    result = run_scenario(sc)
    if args.log is not None:
        with open(args.log, "w") as f:
            for e in result.env.sim.log if result.env is not None else []:
                f.write(
                    json.dumps(
                        {
                            "time_ms": e.time_ms,
                            "node": e.node,
                            "face": e.face,
                            "dir": e.direction,
                            "pkt": e.pkt_type,
                            "name": e.name.uri(),
                        }
                    )
                    + "\n"
                )
    m = result.metrics
    print(
        f"scenario {sc.name}: {m.commands_acked}/{m.commands_sent} acked, "
        f"{m.executed} executed, {m.endpoint_messages} endpoint messages"
    )
    if m.note:
        print(m.note)
    for c in result.checks:
        print(f"{'pass' if c.ok else 'FAIL'} {c.name}: {c.detail}")
    return 0 if result.ok else 1


def _cmd_attacks(args) -> int:
    from .attacks import run_adversary_suite

    reports = run_adversary_suite(seed=args.seed)
    for r in reports:
        print(f"{'pass' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    held = sum(r.passed for r in reports)
    print(f"{held}/{len(reports)} attacks held")
    return 0 if held == len(reports) else 1


def _cmd_bench(args) -> int:
    from .bench import bench_ratios, format_table, run_bench, write_csv

    rows = run_bench(iters=args.iters)
    print(format_table(rows))
    for name, value in bench_ratios(rows).items():
        print(f"{name}: {value:.1f}x")
    if args.csv is not None:
        write_csv(rows, args.csv)
    return 0


def _cmd_gateway(args) -> int:
    from .gateway import serve

    def announce(addr):
        print(f"listening on {addr[0]}:{addr[1]}", flush=True)

    return serve(args.listen, args.scenario, token=args.token, on_bound=announce)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lumen", description="secure lighting control over named content"
    )
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and check its assertions")
    run.add_argument("scenario", help="path to a scenario document")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--log", default=None, help="write the event log as NDJSON")
    run.set_defaults(fn=_cmd_run)

    att = sub.add_parser("attack-suite", help="run the scripted adversary suite")
    att.add_argument("--seed", type=int, default=0)
    att.set_defaults(fn=_cmd_attacks)

    ben = sub.add_parser("bench", help="time the cryptography spent per command")
    ben.add_argument("--iters", type=int, default=1000)
    ben.add_argument("--csv", default=None, help="also write the rows as CSV")
    ben.set_defaults(fn=_cmd_bench)

    gw = sub.add_parser("gateway", help="bridge a live scenario to control panels")
    gw.add_argument("--listen", required=True, help="host:port to serve on")
    gw.add_argument("--scenario", required=True, help="scenario document to run")
    gw.add_argument("--token", default=None, help="shared token clients must present")
    gw.set_defaults(fn=_cmd_gateway)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
