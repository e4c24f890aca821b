"""Analytic variance versus Monte Carlo on the i.i.d. benchmark.

    python3 scripts/benchmark_validation.py --replicates 5000 --seed 17
"""
import argparse
import time

import numpy as np

from koopmuq.estimators import dmd_estimate
from koopmuq.montecarlo import MCConfig, compare_report, iid_benchmark, mc_variance
from koopmuq.muq import analytic_variance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=200)
    ap.add_argument("--variances", default="1,4,0.25,9")
    ap.add_argument("--replicates", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=17)
    ap.add_argument("--parallel", action="store_true")
    args = ap.parse_args()

    variances = [float(v) for v in args.variances.split(",")]
    snap, noise = iid_benchmark(args.m, variances)
    vm = analytic_variance(dmd_estimate(snap), noise)
    t0 = time.perf_counter()
    mc = mc_variance(snap, noise, MCConfig(replicates=args.replicates, seed=args.seed,
                                           parallel=args.parallel))
    elapsed = time.perf_counter() - t0
    rep = compare_report(mc, vm, seed=args.seed)

    np.set_printoptions(precision=4, suppress=True)
    print(f"m={args.m} p={vm.p} N={args.replicates} ({elapsed:.2f}s)")
    print("analytic S:\n", vm.S)
    print("Monte Carlo R_hat:\n", mc.R_hat)
    print("ratio R_hat / S:\n", rep.ratio)
    print("KS vs normal:\n", rep.ks)
    print(f"max |ratio - 1| = {np.max(np.abs(rep.ratio - 1)):.4f}, median ratio = {rep.median_ratio:.4f}")


if __name__ == "__main__":
    main()
