"""Command-line front end: ``pinnheat <subcommand> --config FILE [--set k=v ...]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .analysis import (compare, extract_line_profile, fem_velocity_sweep, passing_time, probe_grid,
                       strictly_decreasing, sweep_config, with_velocity)
from .config import ConfigError, SimulationConfig, apply_overrides, dump_toml, parse_config
from .fem import SolverError, solve_problem
from .fem.mms import spatial_convergence
from .training import HISTORY_COLUMNS, TrainingDiverged, query, run_sequential

log = logging.getLogger("pinnheat")


def load_config(args) -> SimulationConfig:
    cfg = parse_config(args.config)
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    return apply_overrides(cfg, overrides)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_pinn(cfg: SimulationConfig, out_dir, log_every: int = 500) -> list:
    """Train all windows, writing one snapshot and one loss CSV per window plus a manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash, seed = cfg.hash(), cfg.seed
    (out_dir / "config.toml").write_text(dump_toml(cfg))
    windows = []
    t_start = time.perf_counter()

    def on_phase_end(snap, history):
        snap_name = f"window_{snap.index:03d}.snap"
        loss_name = f"losses_window_{snap.index:03d}.csv"
        io.write_snapshot(out_dir / snap_name, snap, chash, seed)
        io.write_loss_csv(out_dir / loss_name, history, chash, seed, window=snap.index)
        windows.append({"index": snap.index, "t0": snap.t0, "t1": snap.t1,
                        "snapshot": snap_name, "losses": loss_name,
                        "final_losses": snap.final_losses})
        io.write_manifest(out_dir, cfg, seed, windows, kind="pinn")

    def progress(k, epoch, losses):
        if log_every and epoch % log_every == 0:
            l_ic, l_bc, l_r, total = losses
            log.info("window %d epoch %6d  L_ic %.3e  L_bc %.3e  L_r %.3e  total %.4e  (%.0f s)",
                     k, epoch, l_ic, l_bc, l_r, total, time.perf_counter() - t_start)

    try:
        return run_sequential(cfg, cfg.seed, on_phase_end=on_phase_end, progress=progress)
    except TrainingDiverged:
        log.error("training diverged; %d completed window(s) kept in %s", len(windows), out_dir)
        raise


def run_fem(cfg: SimulationConfig, out_dir, write_csv: bool = True):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sol = solve_problem(cfg.domain, cfg.material, cfg.source, cfg.fem.h, cfg.fem.dt, cfg.fem_t_end,
                        u0=cfg.boundary.initial_temperature, neumann_sign=cfg.boundary.neumann_sign,
                        lumped=cfg.fem.lumped_mass, tol=cfg.fem.tol)
    chash = cfg.hash()
    io.save_fem_solution(out_dir / "fem_solution.npz", sol, chash, cfg.seed)
    if write_csv:
        n = sol.mesh.n_nodes
        pts = np.column_stack([np.tile(sol.mesh.nodes, (len(sol.times), 1)), np.repeat(sol.times, n)])
        io.write_field_csv(out_dir / "fem_nodal_field.csv", pts, sol.u.ravel(), config_hash=chash,
                           seed=cfg.seed)
    (out_dir / "config.toml").write_text(dump_toml(cfg))
    io.write_manifest(out_dir, cfg, cfg.seed, [], kind="fem")
    return sol


def load_solution(run_dir):
    kind = io.read_manifest(run_dir)["kind"]
    if kind == "pinn":
        return io.load_snapshots(run_dir)
    return io.load_fem_solution(Path(run_dir) / "fem_solution.npz")


# ---------------------------------------------------------------------------
# subcommands

def cmd_run_pinn(args):
    cfg = load_config(args)
    snaps = run_pinn(cfg, _out_dir(args), log_every=args.log_every)
    print(f"trained {len(snaps)} window(s); snapshots in {args.out_dir}")


def cmd_run_fem(args):
    cfg = load_config(args)
    out = _out_dir(args)
    if args.mms:
        hs = tuple(args.mms_h)
        errors, orders = spatial_convergence(cfg.domain, cfg.material, hs, args.mms_dt, args.mms_t)
        rows = np.column_stack([hs, errors, np.concatenate([[np.nan], orders])])
        io.write_table(out / "mms_convergence.csv", ("h_mm", "l2_error", "order"), rows,
                       config_hash=cfg.hash(), seed=cfg.seed)
        for h, e, p in rows:
            print(f"h = {h:6.3f} mm   L2 error = {e:.4e}   order = {p:.3f}")
        return
    sol = run_fem(cfg, out, write_csv=not args.no_csv)
    print(f"FEM: {sol.mesh.n_nodes} nodes, {len(sol.mesh.triangles)} triangles, "
          f"{len(sol.times) - 1} steps; max temperature {sol.u.max():.2f} K")


def cmd_profile(args):
    cfg = io.load_run_config(args.run_dir)
    sol = load_solution(args.run_dir)
    out = _out_dir(args)
    path = cfg.domain.path if args.path is None else ((args.path[0], args.path[1]),
                                                      (args.path[2], args.path[3]))
    for t in args.time:
        s, u = extract_line_profile(sol, path, args.n, t, cfg.domain)
        name = out / f"profile_t{t:g}.csv"
        io.write_profile_csv(name, s, u, config_hash=cfg.hash(), seed=cfg.seed, t=t)
        print(f"t = {t:g} s: peak {u.max():.2f} K at s = {s[np.argmax(u)]:.3f} mm -> {name}")


def cmd_compare(args):
    cfg = io.load_run_config(args.pinn_dir)
    a = load_solution(args.pinn_dir)
    b = load_solution(args.fem_dir)
    times = args.time or list(cfg.output.times)
    report = compare(a, b, times, cfg.domain, cfg.output.probe_nx, cfg.output.probe_ny,
                     cfg.output.profile_points)
    out = _out_dir(args)
    io.write_table(out / "comparison.csv", report.COLUMNS, report.table(),
                   config_hash=cfg.hash(), seed=cfg.seed)
    for r in report.rows:
        io.write_table(out / f"profiles_t{r.t:g}.csv", ("s_mm", "pinn_K", "fem_K"),
                       np.column_stack([r.profile_s, r.profile_a, r.profile_b]),
                       config_hash=cfg.hash(), seed=cfg.seed, t=r.t)
    text = report.summary()
    (out / "comparison.txt").write_text(text + "\n")
    print(text)


def cmd_export(args):
    cfg = io.load_run_config(args.run_dir)
    sol = load_solution(args.run_dir)
    field = (lambda p: query(sol, p)) if isinstance(sol, list) else None
    if field is None:
        from .fem import interpolate
        field = lambda p: interpolate(sol, p)  # noqa: E731
    out = _out_dir(args)
    d = cfg.domain
    xs = np.linspace(0.0, d.length, args.nx)
    ys = np.linspace(0.0, d.width, args.ny)
    X, Y = np.meshgrid(xs, ys)
    for t in args.time:
        pts = np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, float(t))])
        u = field(pts)
        stem = out / f"field_t{t:g}"
        if args.format == "csv":
            io.write_field_csv(stem.with_suffix(".csv"), pts, u, config_hash=cfg.hash(), seed=cfg.seed)
        else:
            io.write_vtk_structured_points(stem.with_suffix(".vtk"), u.reshape(args.ny, args.nx),
                                           (0.0, 0.0), (xs[1] - xs[0], ys[1] - ys[0]),
                                           config_hash=cfg.hash(), seed=cfg.seed, t=t)
        print(f"t = {t:g} s -> {stem}.{args.format}")


def cmd_sweep_velocity(args):
    cfg = load_config(args)
    out = _out_dir(args)
    probe = tuple(args.probe)
    rows = []
    if args.solver in ("fem", "both"):
        res = fem_velocity_sweep(cfg, args.velocities, probe)
        for r in res:
            rows.append(("fem", r.velocity, r.t_pass, r.probe_temperature))
    if args.solver in ("pinn", "both"):
        for v in args.velocities:
            tp = passing_time(with_velocity(cfg, v), probe)
            if args.travel is not None:
                c = sweep_config(cfg, v, probe, travel=args.travel)
            else:
                c = sweep_config(cfg, v, probe, window=args.window)
            if not args.windows:
                c = with_velocity(cfg, v, t_end=c.schedule.t_total, dt_window=c.schedule.t_total)
            snaps = run_pinn(c, out / f"pinn_v{v:g}", log_every=args.log_every)
            rows.append(("pinn", v, tp, float(query(snaps, np.array([*probe, tp])))))
    lines = [f"# config_hash={cfg.hash()} seed={cfg.seed}", "solver,velocity_mm_s,t_pass_s,probe_K"]
    lines += [f"{s},{v!r},{tp!r},{u!r}" for s, v, tp, u in rows]
    (out / "velocity_sweep.csv").write_text("\n".join(lines) + "\n")
    for solver in ("fem", "pinn"):
        vals = [u for s, v, tp, u in rows if s == solver]
        if vals:
            print(f"{solver}: " + ", ".join(f"v={v:g}: {u:.2f} K" for s, v, tp, u in rows if s == solver)
                  + f"  strictly decreasing: {strictly_decreasing(vals)}")


def cmd_show_config(args):
    cfg = load_config(args)
    print(dump_toml(cfg), end="")
    print(f"# config hash: {cfg.hash()}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pinnheat", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", default="full",
                        help="TOML config file or bundled profile name (full, desk)")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override a config value (TOML syntax); repeatable")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out-dir", default="runs/out")

    sp = sub.add_parser("run-pinn", help="sequential window training")
    with_config(sp)
    sp.add_argument("--log-every", type=int, default=500)
    sp.set_defaults(func=cmd_run_pinn)

    sp = sub.add_parser("run-fem", help="finite-element reference solution")
    with_config(sp)
    sp.add_argument("--no-csv", action="store_true", help="skip the nodal CSV export")
    sp.add_argument("--mms", action="store_true", help="run the manufactured-solution study instead")
    sp.add_argument("--mms-h", type=float, nargs="+", default=[1.0, 0.5, 0.25])
    sp.add_argument("--mms-dt", type=float, default=0.01)
    sp.add_argument("--mms-t", type=float, default=1.0)
    sp.set_defaults(func=cmd_run_fem)

    sp = sub.add_parser("profile", help="temperature along a segment (default E-F)")
    sp.add_argument("run_dir")
    sp.add_argument("--time", type=float, nargs="+", required=True)
    sp.add_argument("--n", type=int, default=201)
    sp.add_argument("--path", type=float, nargs=4, metavar=("X0", "Y0", "X1", "Y1"))
    sp.add_argument("--out-dir", default="runs/profiles")
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("compare", help="PINN-vs-FEM metrics")
    sp.add_argument("pinn_dir")
    sp.add_argument("fem_dir")
    sp.add_argument("--time", type=float, nargs="+")
    sp.add_argument("--out-dir", default="runs/compare")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("export", help="sample a field on a regular grid")
    sp.add_argument("run_dir")
    sp.add_argument("--time", type=float, nargs="+", required=True)
    sp.add_argument("--format", choices=("csv", "vtk"), default="csv")
    sp.add_argument("--nx", type=int, default=201)
    sp.add_argument("--ny", type=int, default=101)
    sp.add_argument("--out-dir", default="runs/export")
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("sweep-velocity", help="probe temperature as the source passes, per velocity")
    with_config(sp)
    sp.add_argument("--velocities", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    sp.add_argument("--probe", type=float, nargs=2, default=[10.0, 5.0])
    sp.add_argument("--solver", choices=("fem", "pinn", "both"), default="fem")
    sp.add_argument("--window", type=float, default=2.0, help="PINN window length (s)")
    sp.add_argument("--travel", type=float,
                    help="size windows so the source moves this many mm per window (overrides --window)")
    sp.add_argument("--windows", action=argparse.BooleanOptionalAction, default=True,
                    help="train sequential windows (--no-windows: one window over the whole run)")
    sp.add_argument("--log-every", type=int, default=500)
    sp.set_defaults(func=cmd_sweep_velocity)

    sp = sub.add_parser("show-config", help="print the resolved config and its hash")
    with_config(sp)
    sp.set_defaults(func=cmd_show_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (ConfigError, FileNotFoundError, io.FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingDiverged, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
