"""Command line entry point: ``cpdqsap {solve,oracle,bench,gen}``.

Exit codes: 0 ok, 2 unreadable or malformed input, 3 numeric failure in the
solver, 4 oracle search space over the cap.
"""
from __future__ import annotations

import argparse
import csv
import importlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .instance import CpdFormatError, generate_random, load_instance, serialize, validate
from .model import build_model, objective_exact
from .oracle import DEFAULT_CAP, SearchSpaceTooLarge, brute_force
from .penalty import NumericalFailure, PenaltyParams, solve
from .rounding import RoundingMode

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_CAP = 0, 2, 3, 4

log = logging.getLogger("cpdqsap")


def _converter(spec):
    """Resolve ``module:function`` into a path -> CPD text callable."""
    if spec is None:
        return None
    mod, _, fn = spec.partition(":")
    if not fn:
        raise argparse.ArgumentTypeError("converter must look like 'module:function'")
    return getattr(importlib.import_module(mod), fn)


def add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver parameters")
    d = PenaltyParams()
    g.add_argument("--sigma0", type=float, default=d.sigma0,
                   help="initial penalty (default: scaled from the energy magnitudes)")
    g.add_argument("--rho", type=float, default=d.rho, help=f"penalty growth (default {d.rho})")
    g.add_argument("--sigma-cap", type=float, default=d.sigma_cap,
                   help="stop once sigma would exceed this (default 1e12 * sigma0)")
    g.add_argument("--inner-max-iters", type=int, default=d.inner_max_iters)
    g.add_argument("--outer-max-iters", type=int, default=d.outer_max_iters)
    g.add_argument("--inner-tol", type=float, default=d.inner_tol)
    g.add_argument("--stable-T", dest="stable_T", type=int, default=d.stable_T,
                   help=f"outer iterations with an unchanged argmax profile (default {d.stable_T})")
    g.add_argument("--eps-support", type=float, default=d.eps_support)
    g.add_argument("--seed", type=int, default=d.seed)
    g.add_argument("--tie-perturbation", type=float, default=d.tie_perturbation)
    g.add_argument("--params-json", metavar="FILE",
                   help="full parameter record; overrides the individual flags")
    g.add_argument("--rounding", choices=[m.value for m in RoundingMode],
                   default=RoundingMode.GREEDY_GRADIENT.value)
    p.add_argument("--converter", metavar="MODULE:FUNC",
                   help="callable turning a foreign instance file (path) into CPD text v1")


def params_from_args(args) -> PenaltyParams:
    if args.params_json:
        with open(args.params_json, encoding="utf-8") as fh:
            return PenaltyParams.from_dict(json.load(fh))
    return PenaltyParams(
        sigma0=args.sigma0, rho=args.rho, sigma_cap=args.sigma_cap,
        inner_max_iters=args.inner_max_iters, outer_max_iters=args.outer_max_iters,
        inner_tol=args.inner_tol, stable_T=args.stable_T, eps_support=args.eps_support,
        seed=args.seed, tie_perturbation=args.tie_perturbation,
    )


def _load(path, converter):
    try:
        return load_instance(path, converter)
    except (CpdFormatError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return None


def cmd_solve(args) -> int:
    try:
        params = params_from_args(args)
        converter = _converter(args.converter)
    except (OSError, ValueError, ImportError, AttributeError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    inst = _load(args.file, converter)
    if inst is None:
        return EXIT_PARSE
    model = build_model(inst)
    try:
        rep = solve(model, params, mode=args.rounding)
    except (NumericalFailure, OverflowError) as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    objective = objective_exact(model, rep.assignment)
    out = Path(args.out) if args.out else Path(args.file).with_suffix(".sol")
    out.write_text(bench.format_solution(objective, rep.relaxation, rep.assignment))
    if args.trace:
        _write_trace(args.trace, rep.trace)

    rec = bench.record_from_report(Path(args.file).stem, inst, rep, args.reference)
    print(bench.format_table([rec]), end="")
    print(f"assignment: {' '.join(map(str, rep.assignment.one_based()))}")
    print(f"solution written to {out}")
    return EXIT_OK


def _write_trace(path, trace):
    cols = ("k", "sigma", "objective", "penalty", "infeasibility", "l0", "inner_iters",
            "inner_converged")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for t in trace:
            w.writerow([getattr(t, c) for c in cols])


def cmd_oracle(args) -> int:
    inst = _load(args.file, _converter(args.converter))
    if inst is None:
        return EXIT_PARSE
    try:
        res = brute_force(inst, args.cap)
    except SearchSpaceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except OverflowError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"optimum {res.value}")
    print(f"count {res.count}")
    print(f"assignment {' '.join(map(str, res.assignment.one_based()))}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if not os.path.isdir(args.directory):
        print(f"error: {args.directory} is not a directory", file=sys.stderr)
        return EXIT_PARSE
    try:
        params = params_from_args(args)
        refs = bench.read_references(args.refs) if args.refs else {}
        converter = _converter(args.converter)
    except (OSError, ValueError, ImportError, AttributeError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    records = bench.run_bench(args.directory, params, args.rounding, refs,
                              args.cap if args.oracle_refs else None, args.workers, converter)
    if args.csv:
        Path(args.csv).write_text(bench.records_to_csv(records))
    print(bench.format_table(records), end="")
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        os.makedirs(args.outdir, exist_ok=True)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    n_min = args.n_min if args.n_min is not None else args.n
    for k in range(args.count):
        # independent stream per file so files do not depend on --count
        file_seed = int(np.random.SeedSequence([args.seed, k]).generate_state(1)[0])
        n = n_min + int(np.random.default_rng(file_seed).integers(0, args.n - n_min + 1))
        try:
            inst = generate_random(n, args.l_min, args.l_max, args.e_max, args.density,
                                   file_seed, e_min=args.e_min)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        assert not validate(inst)
        path = Path(args.outdir) / f"cpd_s{args.seed}_{k:04d}.cpd"
        try:
            path.write_text(serialize(inst))
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpdqsap", description="Protein design energy minimisation via a QSAP penalty method.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance and write a solution file")
    p.add_argument("file")
    p.add_argument("-o", "--out", help="solution path (default: FILE with .sol suffix)")
    p.add_argument("--trace", metavar="CSV", help="write the per-iteration trace here")
    p.add_argument("--reference", type=int, help="reference objective for the ratio column")
    add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="exact optimum by enumeration")
    p.add_argument("file")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--converter", metavar="MODULE:FUNC")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="solve every instance in a directory")
    p.add_argument("directory")
    p.add_argument("--refs", metavar="FILE", help="'<name> <integer>' reference objectives")
    p.add_argument("--oracle-refs", action="store_true",
                   help="use the brute-force optimum as reference where none is given")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--csv", metavar="FILE")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: available cores)")
    add_solver_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="write seeded random instances")
    p.add_argument("--n", type=int, default=6, help="positions (upper bound with --n-min)")
    p.add_argument("--n-min", type=int, default=None)
    p.add_argument("--l-min", type=int, default=2)
    p.add_argument("--l-max", type=int, default=4)
    p.add_argument("--e-min", type=int, default=0)
    p.add_argument("--e-max", type=int, default=100)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
