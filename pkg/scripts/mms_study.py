"""Grid-refinement study of the potential solver on the manufactured solution.

    python scripts/mms_study.py --eps 0.5 1 2 --sizes 33 65 129 257
"""

import argparse

import numpy as np

from mems_blowup.verify import mms_errors


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[33, 65, 129, 257])
    ap.add_argument("--depth", type=float, default=0.25)
    args = ap.parse_args()

    for eps in args.eps:
        errs = mms_errors(args.sizes, epsilon=eps, depth=args.depth)
        print(f"eps = {eps}")
        for i, (n, e) in enumerate(zip(args.sizes, errs)):
            order = "" if i == 0 else f"  observed order {np.log2(errs[i - 1] / e):.3f}"
            print(f"  n = {n:4d}  max error {e:.4e}{order}")


if __name__ == "__main__":
    main()
