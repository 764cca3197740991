"""Solve the seeded random suite and compare against brute force.

    python3 scripts/run_random_suite.py --seeds 0 200
"""
import argparse
import statistics
import time

from cpdqsap import PenaltyParams, brute_force, build_model, solve
from cpdqsap.bench import suite_instance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs=2, default=(0, 200), metavar=("START", "STOP"))
    ap.add_argument("--sigma0", type=float, default=None)
    ap.add_argument("--rho", type=float, default=10.0)
    ap.add_argument("--rounding", default="greedy-gradient")
    ap.add_argument("--show-misses", action="store_true")
    args = ap.parse_args()

    params = PenaltyParams(sigma0=args.sigma0, rho=args.rho)
    gaps, reasons, outer, inner = [], {}, [], []
    t0 = time.perf_counter()
    for seed in range(*args.seeds):
        inst = suite_instance(seed)
        rep = solve(build_model(inst), params, mode=args.rounding)
        opt = brute_force(inst).value
        gap = 100.0 * (rep.objective - opt) / max(1, abs(opt))
        gaps.append(gap)
        reasons[rep.reason] = reasons.get(rep.reason, 0) + 1
        outer.append(rep.outer_iters)
        inner.append(rep.inner_iters)
        if args.show_misses and gap > 0:
            print(f"seed {seed:5d} n={inst.n} m={inst.m} solver={rep.objective} optimum={opt} "
                  f"gap={gap:.2f}%")
    elapsed = time.perf_counter() - t0

    print(f"instances      {len(gaps)}")
    print(f"exact          {sum(g == 0 for g in gaps) / len(gaps):.1%}")
    print(f"median gap     {statistics.median(gaps):.2f}%")
    print(f"max gap        {max(gaps):.2f}%")
    print(f"reasons        {reasons}")
    print(f"mean iters     outer {statistics.mean(outer):.1f}  inner {statistics.mean(inner):.1f}")
    print(f"time           {elapsed:.2f}s")


if __name__ == "__main__":
    main()
