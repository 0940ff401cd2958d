"""Epsilon-tail slopes of the q-energy of t -> mu(z0^d - t z1^d) near t = 0.

    python scripts/sobolev_probe.py --degree 3 --qs 1.2,1.5,1.8
"""
import argparse

from hypersurface_ot.regularity import exponent_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--degree", type=int, default=3)
    ap.add_argument("--qs", default="1.2,1.8")
    ap.add_argument("--epsilons", default="1e-8,1e-9,1e-10,1e-11,1e-12")
    ap.add_argument("--per-decade", type=int, default=40)
    args = ap.parse_args()

    rep = exponent_probe(args.degree, [float(q) for q in args.qs.split(",")],
                         [float(e) for e in args.epsilons.split(",")], per_decade=args.per_decade)
    print(f"d = {rep['d']}, threshold q = {rep['threshold']:.4f}")
    print(f"{'q':>6} {'regime':>11} {'slope':>9} {'predicted':>9} {'pass':>5}")
    for r in rep["results"]:
        print(f"{r['q']:6.3f} {r['regime']:>11} {r['slope']:+9.4f} {r['predicted_slope']:+9.4f} {str(r['pass']):>5}")


if __name__ == "__main__":
    main()
