"""Ratio of the inner W2 estimate to the coefficient FS distance for close pairs.

Bounded ratios at every guard margin are consistent with Lipschitz continuity
away from the discriminant.

    python scripts/lipschitz_probe.py --epsilons 0.05,0.1,0.2 --trials 8
"""
import argparse

import numpy as np

from hypersurface_ot.geodesic import lipschitz_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epsilons", default="0.05,0.1,0.2")
    ap.add_argument("--trials", type=int, default=8)
    ap.add_argument("--degree", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'epsilon':>8} {'min':>8} {'median':>8} {'max':>8} {'bounded':>8}")
    for eps in (float(e) for e in args.epsilons.split(",")):
        rep = lipschitz_probe(eps, args.trials, rng, d=args.degree)
        print(f"{eps:8.3f} {rep['ratio_min']:8.4f} {rep['ratio_median']:8.4f} "
              f"{rep['ratio_max']:8.4f} {str(rep['bounded']):>8}")


if __name__ == "__main__":
    main()
