"""Solve one instance and print the outer-iteration trace.

    python3 scripts/trace_run.py instance.cpd [--csv trace.csv]
    python3 scripts/trace_run.py --suite-seed 17
"""
import argparse
import csv
import sys

from cpdqsap import PenaltyParams, build_model, load_instance, solve, support
from cpdqsap.bench import suite_instance

COLUMNS = ("k", "sigma", "objective", "penalty", "infeasibility", "l0", "inner_iters",
           "inner_converged")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("file", nargs="?")
    src.add_argument("--suite-seed", type=int)
    ap.add_argument("--csv")
    ap.add_argument("--rho", type=float, default=10.0)
    ap.add_argument("--stable-T", type=int, default=10)
    args = ap.parse_args()

    inst = suite_instance(args.suite_seed) if args.file is None else load_instance(args.file)
    model = build_model(inst)
    rep = solve(model, PenaltyParams(rho=args.rho, stable_T=args.stable_T))

    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    w = csv.writer(out)
    w.writerow(COLUMNS)
    for t in rep.trace:
        w.writerow([getattr(t, c) for c in COLUMNS])
    if args.csv:
        out.close()

    print(f"reason {rep.reason}, objective {rep.objective}, relaxation {rep.relaxation:.6g}, "
          f"support {support(model, rep.z).representatives()}", file=sys.stderr)


if __name__ == "__main__":
    main()
