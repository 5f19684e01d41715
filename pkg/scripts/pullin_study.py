"""Pull-in threshold of the small-gap model: continuation vs shooting vs time-dependent bisection."""

import argparse

from mems_blowup.small_gap import continue_branch, dynamic_threshold_bracket, shooting_threshold


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nx", type=int, nargs="+", default=[65, 129, 257, 513, 1025])
    ap.add_argument("--bisect", type=int, default=8, help="bisection steps (0 to skip)")
    ap.add_argument("--t-max", type=float, default=200.0)
    args = ap.parse_args()

    oracle = shooting_threshold()
    print(f"shooting oracle lambda* = {oracle:.12f}")
    for nx in args.nx:
        b = continue_branch(nx)
        lam, mu = b.fold
        print(f"nx = {nx:5d}  lambda* = {lam:.10f}  rel. error {abs(lam - oracle) / oracle:.2e}  min u at fold {mu:.6f}")
    if args.bisect:
        lo, hi = dynamic_threshold_bracket(oracle / 2, 2 * oracle, iterations=args.bisect, t_max=args.t_max)
        print(f"touchdown-vs-settle bracket at t_max = {args.t_max}: [{lo:.6f}, {hi:.6f}]")


if __name__ == "__main__":
    main()
