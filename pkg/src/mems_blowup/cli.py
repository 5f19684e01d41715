"""Command line entry point: ``run``, ``sweep``, ``verify`` and ``pullin``.

Exit codes: 0 clean, 2 bad configuration, 3 certificate failure, 4 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import ConfigError, SimulationConfig, build_grid
from .outputs import (
    ATLAS_HEADER,
    Axis,
    SweepPlan,
    config_echo,
    parse_config,
    run_summary,
    write_certificates,
    write_csv,
    write_json,
    write_trajectory,
)
from .potential import extract_traces, solve_potential
from .small_gap import continue_branch, run_small_gap, shooting_threshold
from .verify import pullin_fixture
from .stepper import SimulationFailure, run_simulation

log = logging.getLogger("mems_blowup")

EXIT_OK, EXIT_CONFIG, EXIT_CERT, EXIT_SOLVER = 0, 2, 3, 4


def execute(config: SimulationConfig):
    """Run the model the config selects; returns (trajectory, error message or None)."""
    runner = run_small_gap if config.uses_small_gap else run_simulation
    try:
        return runner(config), None
    except SimulationFailure as exc:
        return exc.trajectory, str(exc)


def _run_point(config: SimulationConfig) -> dict:
    try:
        traj, error = execute(config)
    except Exception as exc:  # isolate sweep points from each other
        return run_summary(config, None, f"{type(exc).__name__}: {exc}")
    return run_summary(config, None if error else traj, error)


def dump_potential(out: Path, config: SimulationConfig, state) -> None:
    grid = build_grid(config.nx, config.nz)
    field = solve_potential(state, config.epsilon, grid, tol_linear=config.tol_linear, delta_touch=config.delta_touch)
    traces = extract_traces(field, state, grid)
    X, H = np.meshgrid(grid.x_nodes, grid.eta_nodes, indexing="ij")
    write_csv(out / "phi.csv", ["x", "eta", "value"], zip(X.ravel(), H.ravel(), field.phi.ravel()))
    write_csv(out / "gamma_m.csv", ["x", "z", "value"], zip(grid.x_nodes, state.u, traces.gamma_m))
    write_csv(out / "gamma_g.csv", ["x", "z", "value"], zip(grid.x_nodes, -np.ones(grid.nx), traces.gamma_g))


def cmd_run(config: SimulationConfig, out: Path, dump: bool = False) -> int:
    out.mkdir(parents=True, exist_ok=True)
    traj, error = execute(config)
    write_trajectory(out / "trajectory.csv", traj)
    write_certificates(out / "certificates.csv", traj.all_certificates())
    summary = run_summary(config, None if error else traj, error)
    summary.update({
        "model": "small_gap" if config.uses_small_gap else "full",
        "t_end": traj.t_end,
        "n_certificates": len(traj.all_certificates()),
        "n_failed": len(traj.failed_certificates),
        "anomalies": traj.anomalies,
        "config": config_echo(config),
    })
    write_json(out / "summary.json", summary)
    if dump and not config.uses_small_gap and traj.final_state.min_gap >= config.delta_touch:
        dump_potential(out, config, traj.final_state)

    if error:
        print(f"solver failure: {error}", file=sys.stderr)
        return EXIT_SOLVER
    if traj.failed_certificates:
        for e in traj.failed_certificates[:10]:
            print(f"certificate {e.name} failed at t={e.t:.6g}: slack {e.slack:.3e} < -{e.tol:.3e}", file=sys.stderr)
        return EXIT_CERT
    log.info("status %s at t=%s", summary["status"], summary["t_event"] or traj.t_end)
    return EXIT_OK


def cmd_sweep(plan: SweepPlan, workers: int = 1) -> int:
    configs = plan.configs()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_point, configs))
    else:
        rows = [_run_point(c) for c in configs]
    plan.out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(plan.out_dir / "atlas.csv", ATLAS_HEADER, ([r[k] for k in ATLAS_HEADER] for r in rows))
    return EXIT_OK


def cmd_verify(tol_scale: float = 1.0, break_stencil: bool = False) -> int:
    from .verify import run_suites

    results = run_suites(tol_scale=tol_scale, break_stencil=break_stencil)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else 1


def cmd_pullin(nx: int, tol: float, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    branch = continue_branch(nx, tol=tol)
    write_csv(out / "branch.csv", ["s", "lambda", "min_u"], ((s, lam, mu) for lam, mu, s in branch.points))
    oracle = shooting_threshold()
    write_json(out / "threshold.json", {
        "lambda_star": branch.fold[0],
        "min_u_at_fold": branch.fold[1],
        "nx": nx,
        "tol": tol,
        "oracle_value": oracle,
        "oracle_method": pullin_fixture()["method"],
    })
    print(f"lambda* = {branch.fold[0]:.10f} (nx={nx}); shooting oracle {oracle:.10f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mems-blowup", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p):
        p.add_argument("--config", type=Path)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--nx", type=int)
        p.add_argument("--nz", type=int)
        p.add_argument("--dt", type=float, help="initial time step")
        p.add_argument("--tmax", type=float)
        p.add_argument("--small-gap", action="store_true", default=None)
        p.add_argument("--cert-every", type=int)
        p.add_argument("--out", type=Path, default=Path("out"))

    p = sub.add_parser("run", help="simulate one trajectory")
    model_flags(p)
    p.add_argument("--dump-potential", action="store_true", help="write phi/gamma CSVs for the final state")

    p = sub.add_parser("sweep", help="lambda x epsilon atlas")
    model_flags(p)
    p.add_argument("--lambda-axis", default="1", help="start:stop:count[:linear|log]")
    p.add_argument("--epsilon-axis", default="1", help="start:stop:count[:linear|log]")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("--tol-scale", type=float, default=1.0, help="multiply suite tolerances")
    p.add_argument("--break-stencil", action="store_true", help="negative control: flip one phi_xx stencil weight")

    p = sub.add_parser("pullin", help="small-gap pull-in threshold by continuation")
    p.add_argument("--nx", type=int, default=257)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", type=Path, default=Path("out"))
    return parser


def _config_from(args) -> SimulationConfig:
    overrides = {
        "lambda": args.lam,
        "epsilon": args.epsilon,
        "nx": args.nx,
        "nz": args.nz,
        "dt_init": args.dt,
        "t_max": args.tmax,
        "small_gap": args.small_gap,
        "cert_every": args.cert_every,
    }
    return parse_config(args.config, overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            return cmd_run(_config_from(args), args.out, args.dump_potential)
        if args.command == "sweep":
            template = _config_from(args)
            plan = SweepPlan(
                Axis.parse(args.lambda_axis, "lambda-axis"),
                Axis.parse(args.epsilon_axis, "epsilon-axis"),
                template,
                args.out,
            )
            return cmd_sweep(plan, args.workers)
        if args.command == "verify":
            return cmd_verify(args.tol_scale, args.break_stencil)
        if args.command == "pullin":
            return cmd_pullin(args.nx, args.tol, args.out)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
