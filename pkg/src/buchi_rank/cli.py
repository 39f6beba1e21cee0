"""Command-line driver: ``buchi-rank verify|refute|exists|corpus``."""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction
from typing import List, Optional, Sequence

from . import corpus
from .ir import ConfigError
from .parser import load_program
from .pipeline import RunConfig, run

EXIT_DECIDED, EXIT_ERROR, EXIT_UNKNOWN = 0, 1, 2


def _bounds(text: str):
    try:
        lo, hi = (int(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    if lo > hi:
        raise argparse.ArgumentTypeError("empty bounds")
    return lo, hi


def _sos(text: str):
    modes = tuple(m.strip() for m in text.split(",") if m.strip())
    for m in modes:
        if m not in ("diagonal", "squares"):
            raise argparse.ArgumentTypeError(f"unknown SOS mode {m!r}")
    return modes


def read_ltl(arg: str) -> str:
    """The formula itself, or the contents of a spec file with ``#`` comments dropped."""
    if os.path.isfile(arg):
        with open(arg) as fh:
            lines = [ln.split("#", 1)[0].strip() for ln in fh]
        text = " ".join(ln for ln in lines if ln)
        if not text:
            raise ConfigError(f"{arg}: no formula")
        return text
    return arg


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--degree", type=int, help="fixed template degree (default: climb the ladder)")
    p.add_argument("--degree-max", type=int, default=2)
    p.add_argument("--sos", type=_sos, default=("diagonal", "squares"),
                   help="multiplier shapes to try, comma separated")
    p.add_argument("--multiplier-degree", type=int)
    p.add_argument("--solvers", help='solver command templates separated by ";"')
    p.add_argument("--timeout", type=float, default=1800.0, help="seconds per solver call")
    p.add_argument("--oracle-bounds", type=_bounds, metavar="LO:HI")
    p.add_argument("--invariant-degree", type=int, default=0,
                   help="co-synthesize invariants of this degree after the plain attempt")
    p.add_argument("--intervals", action="store_true",
                   help="strengthen location invariants with interval analysis")
    p.add_argument("--reals", action="store_true",
                   help="real-valued unknowns and the small epsilon rewrite")
    p.add_argument("--eps", type=Fraction, help="epsilon for strict atoms")
    p.add_argument("--json", action="store_true", help="print the JSON report")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="buchi-rank",
                                 description="LTL verification and refutation of polynomial programs "
                                             "via Büchi ranking functions")
    sub = ap.add_subparsers(dest="command", required=True)
    for mode, help_ in (("verify", "all runs satisfy the formula"),
                        ("refute", "some run violates the formula"),
                        ("exists", "some run satisfies the formula")):
        p = sub.add_parser(mode, help=help_)
        p.add_argument("program")
        p.add_argument("--ltl", required=True, help="formula text or a file holding it")
        p.add_argument("--hoa", help="deterministic Büchi automaton in HOA format")
        p.add_argument("--out", help="artifact directory")
        p.add_argument("--strict-invariants", action="store_true",
                       help="answer Unknown when annotations fail the inductiveness sample")
        _common(p)
    p = sub.add_parser("corpus", help="run the shipped corpus and cross-check with the oracle")
    p.add_argument("--programs", nargs="*", help="subset of corpus program names")
    p.add_argument("--specs", nargs="*", help="subset of formula shapes (RA OV RC PR)")
    p.add_argument("--bounds", type=_bounds, default=corpus.DEFAULT_BOUNDS, metavar="LO:HI")
    _common(p)
    p.set_defaults(timeout=2.0, sos=("diagonal",))
    return ap


def config_from(args, mode: str, **extra) -> RunConfig:
    return RunConfig(
        mode=mode, degree=args.degree, degree_max=args.degree_max, sos=args.sos,
        multiplier_degree=args.multiplier_degree,
        solvers=[c.strip() for c in args.solvers.split(";") if c.strip()] if args.solvers else None,
        timeout=args.timeout, eps=args.eps, integer=not args.reals,
        invariant_degree=args.invariant_degree, intervals=args.intervals, **extra)


def _single(args) -> int:
    ts = load_program(args.program)
    ltl = read_ltl(args.ltl)
    hoa = None
    if args.hoa:
        with open(args.hoa) as fh:
            hoa = fh.read()
    cfg = config_from(args, args.command, oracle_bounds=args.oracle_bounds, out_dir=args.out,
                      strict_invariants=args.strict_invariants)
    rep = run(cfg, ts, ltl, hoa)
    if args.json:
        print(rep.dumps())
    else:
        print(f"{rep.verdict} ({rep.route}) {rep.formula}")
        if rep.witness is not None:
            for loc, f in sorted(rep.witness.functions.items()):
                print(f"  f[{loc}] = {f.to_str(ts.variables)}")
            if rep.witness.init_valuation is not None:
                print(f"  init = ({', '.join(str(v) for v in rep.witness.init_valuation)})")
        for n in rep.notes:
            print(f"  note: {n}")
        if rep.oracle is not None:
            print(f"  oracle: {json.dumps(rep.oracle, sort_keys=True)}")
    return EXIT_UNKNOWN if rep.verdict == "Unknown" else EXIT_DECIDED


def run_corpus(cfg_of, programs: Optional[Sequence[str]] = None, specs: Optional[Sequence[str]] = None,
               bounds=corpus.DEFAULT_BOUNDS, out=print) -> List[dict]:
    """Run every (program, shape) pair; one row per instance with the oracle verdict."""
    templates = [t for t in corpus.load_spec_templates() if not specs or t.name in specs]
    rows = []
    for name in corpus.program_paths():
        if programs and name not in programs:
            continue
        base = corpus.load(name)
        for t in templates:
            formula, ts = t.bind(base)
            t0 = time.monotonic()
            rep = run(cfg_of(bounds), ts, formula)
            row = {"program": name, "spec": t.name, "verdict": rep.verdict, "route": rep.route,
                   "agrees": rep.oracle.get("agrees") if rep.oracle else None,
                   "oracle_applicable": bool(rep.oracle and rep.oracle.get("applicable")),
                   "seconds": round(time.monotonic() - t0, 3), "report": rep}
            rows.append(row)
            if out is not None:
                flag = {True: "ok", False: "CONTRADICTION", None: "-"}[row["agrees"]]
                out(f"{name:14s} {t.name}  {rep.verdict:8s} {rep.route:11s} oracle:{flag:13s} {row['seconds']:7.2f}s")
    return rows


def _corpus(args) -> int:
    rows = run_corpus(lambda b: config_from(args, "verify", oracle_bounds=b),
                      args.programs, args.specs, args.bounds,
                      out=None if args.json else print)
    bad = sum(1 for r in rows if r["agrees"] is False)
    counts = {}
    for r in rows:
        counts[r["verdict"]] = counts.get(r["verdict"], 0) + 1
    if args.json:
        print(json.dumps({"instances": [{k: v for k, v in r.items() if k != "report"} for r in rows],
                          "contradictions": bad, "verdicts": counts}, indent=2, sort_keys=True))
    else:
        print(f"{len(rows)} instances, {bad} contradictions, " +
              ", ".join(f"{k} {v}" for k, v in sorted(counts.items())))
    return EXIT_ERROR if bad else EXIT_DECIDED


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "corpus":
            return _corpus(args)
        return _single(args)
    except (ConfigError, OSError) as exc:
        print(f"buchi-rank: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
