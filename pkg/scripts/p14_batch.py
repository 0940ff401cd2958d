"""Quasi-concavity and condition length along random W2 geodesics of binary forms.

    python scripts/p14_batch.py --instances 100 --max-degree 5 --out p14.json
"""
import argparse
import json

import numpy as np

from hypersurface_ot.condition import p14_batch
from hypersurface_ot.projective import HomPoly


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=100)
    ap.add_argument("--max-degree", type=int, default=5)
    ap.add_argument("--grid", type=int, default=33)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    degrees = [2 + k % (args.max_degree - 1) for k in range(args.instances)]
    pairs = [(HomPoly.random(1, d, rng), HomPoly.random(1, d, rng)) for d in degrees]
    batch = p14_batch(pairs, grid=args.grid)
    fit = batch["fit"]
    print(f"instances          {batch['instances']}")
    print(f"alpha4 violations  {batch['alpha4_violations']}")
    print(f"alpha2 violations  {batch['alpha2_violations']}")
    print(f"min dist to disc   {batch['min_dist_to_discriminant']:.3e}")
    print(f"beta3, beta4       {fit['beta3']:.4f}, {fit['beta4']:.4f} (conjectured beta4 = 1)")
    print(f"beta3 at beta4 = 1 {fit['beta3_at_beta4_one']:.4f}")
    if args.out:
        doc = {k: v for k, v in batch.items() if k != "reports"}
        doc["reports"] = [r.to_json() for r in batch["reports"]]
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2, default=float)


if __name__ == "__main__":
    main()
