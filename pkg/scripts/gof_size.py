"""Empirical size of the bootstrap GoF test under an NB null."""

import argparse

import numpy as np
from scipy import stats

from nbrepro.gof import gof_test
from nbrepro.negbin import NegBinParams, nb_sample
from nbrepro.rng import substream


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--B", type=int, default=499)
    ap.add_argument("--p", type=float, default=0.1)
    ap.add_argument("--r", type=float, default=15.0)
    ap.add_argument("--seed", type=int, default=123)
    args = ap.parse_args()
    prm = NegBinParams(args.p, args.r)
    pv = np.array([
        gof_test(nb_sample(prm, args.n, seed=substream(args.seed, k, 0)), B_gof=args.B,
                 seed=substream(args.seed, k, 1)).p_value
        for k in range(args.runs)
    ])
    print(f"rejection rate at 5%: {np.mean(pv <= 0.05):.3f}")
    print(f"KS distance to uniform: {stats.kstest(pv, 'uniform').statistic:.3f}")


if __name__ == "__main__":
    main()
