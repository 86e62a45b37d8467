"""Median warm-start Procrustes error against samples per round, with a log-log slope fit.

Trimmed PCA should show d_P ~ N^(-1/2), i.e. a slope near -0.5.
"""
import argparse
import statistics

import numpy as np

from lowrankpoly.harness import phase_retrieval_instance
from lowrankpoly.model import SampleOracle, random_instance
from lowrankpoly.subspace import procrustes_distance
from lowrankpoly.trimmed_pca import TrimConfig, trimmed_pca


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--r", type=int, default=1)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--sizes", type=int, nargs="+", default=[2000, 5000, 20000, 80000])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    medians = []
    for N in args.sizes:
        dists = []
        for trial in range(args.trials):
            inst_ss, oracle_ss = np.random.SeedSequence([args.seed, trial]).spawn(2)
            if (args.r, args.d) == (1, 2):
                inst = phase_retrieval_instance(args.n, inst_ss)
            else:
                inst = random_instance(args.n, args.r, args.d, inst_ss, 0.3)
            U = trimmed_pca(SampleOracle(inst, oracle_ss), args.r, TrimConfig(samples_per_round=N))
            dists.append(procrustes_distance(U, inst.truth.frame))
        medians.append(statistics.median(dists))
        print(f"N={N:>8}  median d_P={medians[-1]:.4f}")
    slope = np.polyfit(np.log(args.sizes), np.log(medians), 1)[0]
    print(f"log-log slope {slope:.3f}")


if __name__ == "__main__":
    main()
