"""Aligned coefficient error of a refit at controlled frame error.

The refit error should grow at most linearly in d_P(V, V*).
"""
import argparse
import math
import statistics

import numpy as np

from lowrankpoly.geosgd import BoostConfig, realign_polynomial
from lowrankpoly.harness import aligned_coef_error, phase_retrieval_instance
from lowrankpoly.model import Parameters, SampleOracle
from lowrankpoly.subspace import Frame


def tilted(V, dp, rng):
    u = V.project_out(rng.standard_normal(V.n))
    u /= np.linalg.norm(u)
    theta = 2 * math.asin(dp / 2)
    W = V.columns.copy()
    W[:, 0] = math.cos(theta) * W[:, 0] + math.sin(theta) * u
    return Frame(W)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--dp", type=float, nargs="+", default=[0.0, 0.01, 0.02, 0.05, 0.1, 0.2])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    inst = phase_retrieval_instance(args.n, args.seed)
    cfg = BoostConfig(eta_coef=0.2, T_realign=200, B_realign=256)
    for dp in args.dp:
        errors = []
        for trial in range(args.trials):
            rng = np.random.default_rng([args.seed, trial, round(dp * 1e4)])
            W = tilted(inst.truth.frame, dp, rng)
            c = realign_polynomial(SampleOracle(inst, rng), W, 2, cfg)
            errors.append(aligned_coef_error(Parameters(c, W), inst.truth))
        med = statistics.median(errors)
        ratio = f"{med / dp:.3f}" if dp > 0 else "-"
        print(f"d_P={dp:<6} median coef error {med:.2e}  error/d_P {ratio}")


if __name__ == "__main__":
    main()
