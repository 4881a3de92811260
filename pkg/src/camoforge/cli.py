"""camoforge command line: gen, obfuscate, attack, simulate, physics.

Exit codes: 0 success, 1 usage, 2 input/transform error, 3 attack budget
exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import attack, bench, obfuscate, physics, simulate
from .netlist import NetlistError, parse_netlist, serialize_netlist

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(cast):
    def conv(text):
        v = cast(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return conv


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _stuck(text):
    net, sep, bit = text.partition("=")
    if not sep or bit not in ("0", "1") or not net:
        raise argparse.ArgumentTypeError(f"expected net=0|1, got {text!r}")
    return net, int(bit)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="camoforge", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="64-bit seed (falls back to $CAMOFORGE_SEED, then 0)")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    g = sub.add_parser("gen", help="write a random benchmark netlist")
    common(g)
    g.add_argument("--out", required=True)
    g.add_argument("--gates", type=_positive(int), default=200)
    g.add_argument("--inputs", type=_positive(int), default=16)
    g.add_argument("--outputs", type=_positive(int), default=8)
    g.add_argument("--depth", type=_positive(int), default=12)

    o = sub.add_parser("obfuscate", help="camouflage / LUT / dummy / stuck-at / timing transforms")
    common(o)
    o.add_argument("--in", dest="inp", required=True)
    o.add_argument("--out", required=True, help="apparent netlist path")
    o.add_argument("--secret", required=True, help="secret JSON path")
    o.add_argument("--camo", type=_nonneg_int, default=0, help="number of seeded camouflage sites")
    o.add_argument("--camo-sites", default=None, help="comma-separated gate ids to camouflage")
    o.add_argument("--lut", action="append", default=[], help="gate id to replace by a LUT (repeatable)")
    o.add_argument("--dummy", type=_nonneg_int, default=0)
    o.add_argument("--stuck", type=_stuck, action="append", default=[], help="net=bit (repeatable)")
    o.add_argument("--timing", action="append", default=[], help="flop id that never latches (repeatable)")
    o.add_argument("--report", default=None, help="also write the JSON report here")
    o.add_argument("--reveal", action="store_true", help="include the secret in stdout output")

    a = sub.add_parser("attack", help="oracle-guided SAT attack on an apparent netlist")
    common(a)
    a.add_argument("--in", dest="inp", required=True)
    a.add_argument("--secret", required=True, help="secret used to build the hidden oracle")
    a.add_argument("--out", default=None, help="report JSON path (default stdout)")
    a.add_argument("--suspect", choices=("declared", "all"), default="declared")
    a.add_argument("--max-queries", type=_positive(int), default=10_000)
    a.add_argument("--max-conflicts", type=_positive(int), default=1_000_000)
    a.add_argument("--time-limit-s", type=_positive(float), default=600.0)
    a.add_argument("--reveal", action="store_true", help="print the recovered key to stdout")

    s = sub.add_parser("simulate", help="evaluate vectors, write a CSV trace")
    common(s)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--secret", default=None, help="realize with this secret before simulating")
    s.add_argument("--vectors", required=True, help="file with one 0/1 vector per line")
    s.add_argument("--out", default=None)

    ph = sub.add_parser("physics", help="evaluate device-model parameter records")
    common(ph)
    ph.add_argument("--in", dest="inp", required=True)
    ph.add_argument("--out", default=None)
    ph.add_argument("--v-dd", type=float, default=1.0)
    ph.add_argument("--v-th", type=float, default=0.5)
    ph.add_argument("--slack", type=float, default=50.0)
    return p


def resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CAMOFORGE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"CAMOFORGE_SEED is not an integer: {env!r}") from None
    return 0


def _write(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def cmd_gen(args, seed: int) -> int:
    n = bench.generate_circuit(args.gates, args.inputs, args.outputs, seed, depth=args.depth)
    _write(args.out, serialize_netlist(n))
    return EXIT_OK


def cmd_obfuscate(args, seed: int) -> int:
    original = parse_netlist(_read(args.inp))
    apparent, secret = original, obfuscate.Secret()
    if args.camo_sites:
        sites = [s for s in args.camo_sites.split(",") if s]
        apparent, secret = obfuscate.camouflage(apparent, sites=sites, seed=seed, secret=secret)
    elif args.camo:
        apparent, secret = obfuscate.camouflage(apparent, count=args.camo, seed=seed, secret=secret)
    for target in args.lut:
        apparent, secret = obfuscate.insert_lut(apparent, target, secret)
    if args.dummy:
        apparent = obfuscate.add_dummy_logic(apparent, args.dummy, seed)
    for net, bit in args.stuck:
        secret = obfuscate.inject_stuck_at(apparent, secret, net, bit)
    for flop in args.timing:
        secret = obfuscate.inject_timing_fault(apparent, secret, flop)

    _write(args.out, serialize_netlist(apparent))
    _write(args.secret, secret.to_json())
    before, after = len(original.gates), len(apparent.gates)
    report = {
        "gates_before": before,
        "gates_after": after,
        "gate_overhead": round((after - before) / before, 6) if before else 0.0,
        "camo_cells": len(secret.camo),
        "lut_cells": len(secret.lut),
        "stuck_nets": len(secret.stuck),
        "timing_faults": len(secret.timing),
        "key_space": obfuscate.key_space_string(apparent),
    }
    if args.report:
        _write(args.report, _json(report))
    shown = dict(report, secret=secret.to_dict()) if args.reveal else report
    sys.stdout.write(_json(shown))
    return EXIT_OK


def cmd_attack(args, seed: int) -> int:
    apparent = parse_netlist(_read(args.inp))
    secret = obfuscate.Secret.from_json(_read(args.secret))
    oracle = simulate.Oracle(obfuscate.realize(apparent, secret))
    limits = attack.AttackLimits(args.max_queries, args.max_conflicts, args.time_limit_s)
    res = attack.deobfuscate(apparent, oracle, attack.SuspicionModel(args.suspect), limits, seed=seed)
    report = res.report(apparent)
    if args.out:
        _write(args.out, _json(report))
        summary = {k: v for k, v in report.items() if k != "key" or args.reveal}
        sys.stdout.write(_json(summary))
    else:
        if not args.reveal:
            report = {k: v for k, v in report.items() if k != "key"}
        sys.stdout.write(_json(report))
    if not res.verified:
        print(f"camoforge: attack not verified: {res.reason}", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_simulate(args, seed: int) -> int:
    n = parse_netlist(_read(args.inp))
    if args.secret:
        n = obfuscate.realize(n, obfuscate.Secret.from_json(_read(args.secret)))
    rows = []
    for lineno, line in enumerate(_read(args.vectors).splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            bits = simulate.parse_vector(line)
            rows.append((bits, simulate.evaluate(n, bits)))
        except simulate.SimulationError as e:
            raise simulate.SimulationError(f"vector row {lineno}: {e}") from None
    _write(args.out, simulate.write_trace(rows))
    return EXIT_OK


def cmd_physics(args, seed: int) -> int:
    env = physics.SignalEnv(args.v_dd, args.v_th, args.slack)
    data = json.loads(_read(args.inp))
    records = data if isinstance(data, list) else [data]
    results = []
    failures = 0
    for i, rec in enumerate(records):
        try:
            if not isinstance(rec, dict):
                raise physics.PhysicsDomainError("record must be a JSON object")
            results.append(physics.classify_record(rec, env))
        except physics.PhysicsDomainError as e:
            failures += 1
            results.append({"id": rec.get("id", i) if isinstance(rec, dict) else i, "error": str(e)})
            print(f"camoforge: record {i}: {e}", file=sys.stderr)
    _write(args.out, _json(results))
    return EXIT_INPUT if records and failures == len(records) else EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "obfuscate": cmd_obfuscate,
    "attack": cmd_attack,
    "simulate": cmd_simulate,
    "physics": cmd_physics,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        seed = resolve_seed(args)
    except UsageError as e:
        print(f"camoforge: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.cmd](args, seed)
    except (
        OSError,
        NetlistError,
        obfuscate.ObfuscationError,
        simulate.SimulationError,
        physics.PhysicsDomainError,
        attack.AttackError,
        json.JSONDecodeError,
        KeyError,
    ) as e:
        print(f"camoforge: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
