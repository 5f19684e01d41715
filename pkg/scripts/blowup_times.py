"""Compare breakdown times with the energy-method upper bounds, under grid refinement.

For each (lambda, eps) with lambda > 1/eps the run from rest must break down
before (1 - E0) / F(0); the sharper (1 - E0) / F(E0) coincides with it for a flat start.
"""

import argparse

from mems_blowup import InitialProfile, SimulationConfig, run_simulation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", nargs="+", default=["2,1", "5,1", "4,0.5", "3,1"], help="lambda,eps pairs")
    ap.add_argument("--grids", nargs="+", default=["65x33", "129x65", "257x129"])
    ap.add_argument("--depth", type=float, default=0.0, help="parabolic initial depth")
    args = ap.parse_args()

    profile = InitialProfile("parabolic", args.depth) if args.depth else InitialProfile()
    print(f"{'lambda':>7} {'eps':>5} {'grid':>8} {'status':>16} {'t_event':>10} {'T_paper':>8} {'T_sharp':>8} {'fails':>5}")
    for case in args.cases:
        lam, eps = map(float, case.split(","))
        for g in args.grids:
            nx, nz = map(int, g.split("x"))
            traj = run_simulation(SimulationConfig(lam=lam, epsilon=eps, nx=nx, nz=nz, initial_profile=profile))
            b = traj.bound
            print(f"{lam:7.3g} {eps:5.3g} {g:>8} {traj.status.kind.value:>16} {traj.status.t_event:10.5f} "
                  f"{b.t_paper if b else float('nan'):8.4f} {b.t_sharp if b else float('nan'):8.4f} "
                  f"{len(traj.failed_certificates):5d}")


if __name__ == "__main__":
    main()
