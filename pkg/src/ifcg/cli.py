"""Command-line interface."""
from __future__ import annotations

import argparse
import random
import sys
from typing import Optional, Sequence

from . import __version__
from .altmonitors import compare, render_records, render_table
from .elaborate import elaborate_cmd
from .lattice import Lattice
from .monitor import DEFAULT_FUEL, Aborted, FuelExhausted, Monitor, render_outcome
from .paired import NotLowEquivalent, PairedMonitor, merge_stores
from .parser import ParseError, Program, parse_program, parse_store
from .printer import print_core, print_program
from .properties import (
    LATTICES,
    Verdict,
    check_dgg,
    check_ni,
    check_preservation,
    check_sgg,
    check_soundness_completeness,
    format_verdict,
    gen_low_equiv_store,
    gen_program,
    make_less_precise,
    run_suite,
    shrink_trial,
)
from .monitor import initial_stack
from .syntax import Frame
from .typecheck import IfcTypeError

EXIT_OK = 0
EXIT_ABORT = 2
EXIT_TYPE = 3
EXIT_PARSE = 4
EXIT_FUEL = 5
EXIT_COUNTEREXAMPLE = 6
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ifcg", description="Gradual information-flow checker and monitors.")
    ap.add_argument("--version", action="version", version=f"ifcg {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="parse and type-check a program")
    p.add_argument("file")

    p = sub.add_parser("elaborate", help="print the evidence-annotated core program")
    p.add_argument("file")
    p.add_argument("--unchecked", action="store_true", help="skip label-flow premises")

    p = sub.add_parser("run", help="run the interval monitor")
    p.add_argument("file")
    p.add_argument("--fuel", type=_positive, default=DEFAULT_FUEL)
    p.add_argument("--trace", choices=("plain", "json"), default="plain")
    p.add_argument("--unchecked", action="store_true", help="run even if the program is ill typed")

    p = sub.add_parser("run-paired", help="run two low-equivalent stores as one paired execution")
    p.add_argument("file")
    p.add_argument("--store2", required=True, help="file with the second store section")
    p.add_argument("--adversary", required=True, help="observation level")
    p.add_argument("--fuel", type=_positive, default=DEFAULT_FUEL)
    p.add_argument("--trace", choices=("plain", "json"), default="plain")
    p.add_argument("--schedule", choices=("left", "interleaved"), default="left")
    p.add_argument("--seed", type=int, default=0)

    for name, what in (
        ("check-ni", "noninterference"),
        ("check-gg", "gradual guarantees"),
        ("check-meta", "paired-execution soundness, completeness and preservation"),
    ):
        p = sub.add_parser(name, help=f"property trials for {what}")
        p.add_argument("file", nargs="?")
        p.add_argument("--random", action="store_true", help="use generated programs")
        p.add_argument("--trials", type=_positive, default=100)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=_positive, default=1)
        p.add_argument("--shrink", action="store_true", help="minimize failing generated programs")
        p.add_argument("--lattice", choices=("two", "four", "both"), default="both")
        p.add_argument("--adversary", help="observation level (file mode)")
        p.add_argument("--store2", help="second store (file mode)")
        p.add_argument("--fuel", type=_positive, default=5_000)

    p = sub.add_parser("compare", help="compare the interval monitor with baseline monitors")
    p.add_argument("file")
    p.add_argument("--monitors", default="nsu,pu,hybrid,interval")
    p.add_argument("--store", action="append", default=[], help="extra store section (repeatable)")
    p.add_argument("--fuel", type=_positive, default=DEFAULT_FUEL)
    p.add_argument("--format", choices=("table", "json"), default="table")

    p = sub.add_parser("gen", help="print a random well-typed program")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=6)
    p.add_argument("--lattice", choices=tuple(LATTICES), default="four")
    return ap


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _load(path: str) -> Program:
    return parse_program(_read(path))


def _store_from(path: str, p: Program) -> dict:
    decls = parse_store(_read(path), p.lattice)
    env = p.env()
    d = {}
    for decl in decls:
        if decl.name not in env:
            raise UsageError(f"{path}: {decl.name} is not declared by the program")
        if decl.type != env[decl.name]:
            raise UsageError(f"{path}: {decl.name} has a different type than in the program")
        d[decl.name] = decl.value
    missing = set(env) - set(d)
    if missing:
        raise UsageError(f"{path}: missing {', '.join(sorted(missing))}")
    return {x: d[x] for x in env}


def _label(lat: Lattice, name: Optional[str]) -> int:
    if name is None:
        raise UsageError("--adversary is required")
    try:
        return lat.label(name)
    except KeyError:
        raise UsageError(f"unknown label {name!r}") from None


def _outcome_code(o) -> int:
    if isinstance(o, Aborted):
        return EXIT_ABORT
    if isinstance(o, FuelExhausted):
        return EXIT_FUEL
    return EXIT_OK


def cmd_check(args) -> int:
    p = _load(args.file)
    elaborate_cmd(p.lattice, p.env(), p.lattice.bot, p.cmd)
    print("ok")
    return EXIT_OK


def cmd_elaborate(args) -> int:
    p = _load(args.file)
    c = elaborate_cmd(p.lattice, p.env(), p.lattice.bot, p.cmd, check=not args.unchecked)
    print(print_core(c, p.lattice))
    return EXIT_OK


def cmd_run(args) -> int:
    p = _load(args.file)
    c = elaborate_cmd(p.lattice, p.env(), p.lattice.bot, p.cmd, check=not args.unchecked)
    o = Monitor(p.lattice).run(p.store(), c, args.fuel)
    for line in render_outcome(o, p.lattice, args.trace):
        print(line)
    return _outcome_code(o)


def cmd_run_paired(args) -> int:
    p = _load(args.file)
    lat = p.lattice
    adv = _label(lat, args.adversary)
    d2 = _store_from(args.store2, p)
    c = elaborate_cmd(lat, p.env(), lat.bot, p.cmd)
    try:
        merged = merge_stores(lat, p.env(), adv, p.store(), d2)
    except NotLowEquivalent as e:
        raise UsageError(f"stores are not low-equivalent at {args.adversary}: {e}") from None
    o = PairedMonitor(lat, schedule=args.schedule, seed=args.seed).run(merged, c, args.fuel)
    for line in render_outcome(o, lat, args.trace):
        print(line)
    return _outcome_code(o)


def _report(lines_and_verdicts, shrink_cb=None) -> int:
    counts = {"PASS": 0, "VACUOUS": 0, "FAIL": 0}
    failed = []
    for n, seed, lattice, v in lines_and_verdicts:
        counts[v.status] += 1
        shown = Verdict(v.status, f"{lattice}: {v.detail}" if lattice else v.detail)
        print(format_verdict(n, seed, shown))
        if v.failed:
            failed.append((seed, lattice))
    print(f"summary: {counts['PASS']} PASS, {counts['VACUOUS']} VACUOUS, {counts['FAIL']} FAIL")
    if failed and shrink_cb is not None:
        for seed, lattice in failed:
            shrink_cb(seed, lattice)
    return EXIT_COUNTEREXAMPLE if failed else EXIT_OK


def _file_trials(kind: str, args) -> int:
    p = _load(args.file)
    lat = p.lattice
    env = p.env()
    c = elaborate_cmd(lat, env, lat.bot, p.cmd)
    fixed2 = _store_from(args.store2, p) if args.store2 else None
    trials = 1 if (fixed2 is not None and kind != "gg") else args.trials

    def verdicts():
        for n in range(trials):
            seed = args.seed + n
            rng = random.Random(seed)
            if kind == "gg":
                p2, pc2 = make_less_precise(rng, p)
                v = check_sgg(p, p2, lat.bot, pc2)
                if v.status == "PASS":
                    c2 = elaborate_cmd(lat, p2.env(), pc2, p2.cmd)
                    k2 = (Frame(initial_stack(lat)[0].iv, pc2),)
                    v = check_dgg(lat, (initial_stack(lat), p.store(), c), (k2, p2.store(), c2), args.fuel)
                yield n, seed, "", v
                continue
            adv = _label(lat, args.adversary)
            d2 = fixed2 if fixed2 is not None else gen_low_equiv_store(rng, p, adv, keep_first=True)
            try:
                if kind == "ni":
                    v = check_ni(lat, adv, env, p.store(), d2, c, args.fuel)
                else:
                    v = check_soundness_completeness(lat, env, adv, p.store(), d2, c, args.fuel, seed=seed)
                    if not v.failed:
                        w = check_preservation(
                            lat, env, adv, merge_stores(lat, env, adv, p.store(), d2), c, 2 * args.fuel + 16
                        )
                        v = w if w.failed else v
            except NotLowEquivalent as e:
                v = Verdict("VACUOUS", f"stores are not low-equivalent: {e}")
            yield n, seed, "", v

    return _report(verdicts())


def cmd_property(kind: str, args) -> int:
    if args.random == bool(args.file):
        raise UsageError("give either FILE or --random")
    if args.file:
        return _file_trials(kind, args)
    lattices = ("two", "four") if args.lattice == "both" else (args.lattice,)

    def shrink(seed: int, lattice: str) -> None:
        small = shrink_trial(kind, seed, lattice)
        if small is not None:
            print(f"# minimal counterexample for seed {seed} on {lattice}")
            print(print_program(small), end="")

    return _report(
        run_suite(kind, args.trials, args.seed, lattices, args.jobs),
        shrink if args.shrink else None,
    )


def cmd_compare(args) -> int:
    p = _load(args.file)
    stores = [("store", p.store())] + [(path, _store_from(path, p)) for path in args.store]
    monitors = [m.strip() for m in args.monitors.split(",") if m.strip()]
    try:
        rows = compare(p, stores, args.fuel, monitors)
    except ValueError as e:
        raise UsageError(str(e)) from None
    lines = render_table(rows) if args.format == "table" else render_records(rows)
    for line in lines:
        print(line)
    return EXIT_OK


def cmd_gen(args) -> int:
    lat = LATTICES[args.lattice]()
    p = gen_program(random.Random(args.seed), args.size, lat)
    print(print_program(p), end="")
    return EXIT_OK


_COMMANDS = {
    "check": cmd_check,
    "elaborate": cmd_elaborate,
    "run": cmd_run,
    "run-paired": cmd_run_paired,
    "check-ni": lambda a: cmd_property("ni", a),
    "check-gg": lambda a: cmd_property("gg", a),
    "check-meta": lambda a: cmd_property("meta", a),
    "compare": cmd_compare,
    "gen": cmd_gen,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except IfcTypeError as e:
        print(f"type error: {e}", file=sys.stderr)
        return EXIT_TYPE
    except UsageError as e:
        print(f"ifcg: error: {e}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
