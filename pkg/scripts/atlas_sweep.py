"""Breakdown atlas over (lambda, eps) against the lambda = 1/eps criterion curve.

Writes atlas.csv via the CLI sweep and prints which side of the curve each point lies on.
Coarse grids by default so the whole atlas runs in about a minute.
"""

import argparse
import csv
from pathlib import Path

from mems_blowup.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambda-axis", default="0.25:8:6:log")
    ap.add_argument("--epsilon-axis", default="0.25:2:4:log")
    ap.add_argument("--nx", default="129")
    ap.add_argument("--nz", default="65")
    ap.add_argument("--tmax", default="5")
    ap.add_argument("--workers", default="4")
    ap.add_argument("--out", type=Path, default=Path("out/atlas"))
    args = ap.parse_args()

    cli(["sweep", "--lambda-axis", args.lambda_axis, "--epsilon-axis", args.epsilon_axis, "--nx", args.nx,
         "--nz", args.nz, "--tmax", args.tmax, "--workers", args.workers, "--out", str(args.out)])
    with open(args.out / "atlas.csv") as fh:
        for r in csv.DictReader(fh):
            lam, eps = float(r["lambda"]), float(r["epsilon"])
            side = "above" if lam * eps > 1 else "below"
            t = f"{float(r['t_event']):.4f}" if r["t_event"] else "-"
            bound = f"{float(r['T_paper']):.4f}" if r["T_paper"] else "-"
            print(f"lambda {lam:7.3f} eps {eps:6.3f} ({side} 1/eps)  {r['status']:>15}  t_event {t:>8}  T_paper {bound:>8}")


if __name__ == "__main__":
    main()
