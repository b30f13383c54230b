"""Non-multiplicativity curve for Werner states: CSV plus the ratio's crossings of 1."""

import argparse

from conelab import werner


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--grid", type=int, default=200)
    ap.add_argument("--out", default="werner_curve.csv")
    args = ap.parse_args()

    rows = werner.nonmultiplicativity_curve(args.d, args.grid)
    werner.write_curve_csv(rows, args.out)
    finite = [r[4] for r in rows if r[4] != float("inf")]
    print(f"wrote {len(rows)} rows to {args.out}")
    print(f"min ratio = {min(finite):.12f}, max finite ratio = {max(finite):.6f}")
    print("crossings of ratio = 1:", ", ".join(f"{x:.4f}" for x in werner.ratio_crossings(args.d, args.grid)))


if __name__ == "__main__":
    main()
