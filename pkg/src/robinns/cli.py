"""Command-line entry point: ``robinns <command> [options]``.

Exit codes: 0 success, 1 usage, configuration or solver error, 2 Picard
divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import calculus as dc
from .evolution import solve_linear
from .fields import random_smooth_field, taylor_green, taylor_green_eigenvalue, taylor_green_pressure
from .grid import BoxGrid, build_grid
from .hodge import SolverError, project
from .io import (FIELD_CELL, FIELD_FACE, ConfigError, RunConfig, __version__, grid_from_header,
                 load_config, read_field, write_diagnostics, write_field)
from .navier_stokes import Constants, PicardDivergence, estimate_constants, picard_solve
from .robin import ScheduleError, beta_validate, robin_operator

EXIT_OK, EXIT_ERROR, EXIT_DIVERGED = 0, 1, 2


class CommandError(RuntimeError):
    pass


# -- helpers -------------------------------------------------------------------------

def _initial_field(cfg: RunConfig, grid: BoxGrid) -> np.ndarray:
    ic = cfg.initial_condition
    if ic.preset == "zero":
        return np.zeros(grid.n_faces)
    if ic.preset == "taylor-green":
        try:
            return taylor_green(grid, ic.amplitude)
        except ValueError as exc:
            raise ConfigError(f"initial_condition: {exc}") from None
    if ic.preset == "random-smooth":
        return random_smooth_field(grid, ic.seed, amplitude=ic.amplitude)
    header, data = read_field(ic.path)
    if header.field_kind != FIELD_FACE or not header.matches(grid):
        raise ConfigError(f"initial-condition file {ic.path} does not match the configured grid")
    return data


def _constants(cfg: RunConfig, schedule, cache: str | None) -> Constants:
    if cache and Path(cache).exists():
        d = json.loads(Path(cache).read_text())
        try:
            return Constants(d["C1"], d["C2"], d["C_MR"], d["delta"], d["eps"], d["seed"], d["ensemble"])
        except KeyError as exc:
            raise ConfigError(f"constants cache {cache} lacks {exc}") from None
    s = cfg.solver
    cdt = s.constants_dt_s or s.dt_s * max(1, int(round(s.tau_s / s.dt_s / 50)))
    c = estimate_constants(schedule, s.tau_s, cdt, ensemble=s.ensemble, seed=s.seed)
    if cache:
        _write_constants(cache, c, cfg, schedule.grid)
    return c


def _constants_doc(c: Constants, cfg: RunConfig, grid: BoxGrid) -> dict:
    doc = c.as_dict()
    doc["grid"] = grid.describe()
    doc["tau_s"] = cfg.solver.tau_s
    doc["config_hash"] = cfg.hash().hex()
    doc["version"] = __version__
    return doc


def _write_constants(path, c: Constants, cfg: RunConfig, grid: BoxGrid) -> None:
    Path(path).write_text(json.dumps(_constants_doc(c, cfg, grid), sort_keys=True, indent=2) + "\n")


def _diagnostic_rows(traj):
    g = traj.grid
    ops = robin_operator(traj.schedule)
    D = dc.operators(g).D
    rows = []
    for n, (t, u) in enumerate(zip(traj.times, traj.states)):
        op = ops(t, "left" if n > 0 else "right")
        bres = op.boundary_residual(u) if g.walls else float("nan")
        l3 = op.curl_L3_diagnostic(u)["ratio"]
        rows.append({"time": t, "norm_H": dc.norm_H(g, u), "norm_V": dc.norm_V(g, u),
                     "form": op.form(u, u, check=False), "boundary_residual": bres,
                     "div_max": float(np.abs(D @ u).max()), "curl_L3_ratio": l3})
    return rows


def _write_snapshots(out: Path, traj, pressure, cadence: int, h: bytes) -> None:
    g = traj.grid
    N = traj.n_steps
    steps = set(range(0, N + 1, cadence)) if cadence > 0 else set()
    steps |= {0, N}
    for n in sorted(steps):
        write_field(out / f"u_{n:06d}.rnsf", g, traj.states[n], FIELD_FACE, traj.times[n], h)
        if pressure is not None:
            write_field(out / f"pi_{n:06d}.rnsf", g, pressure[n], FIELD_CELL, traj.times[n], h)


def _setup(args):
    if not args.config:
        raise CommandError("--config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.solver.seed = int(args.seed)
    grid = cfg.grid.build()
    schedule = cfg.schedule.build(grid)
    out = Path(args.out or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, grid, schedule, out


# -- commands -----------------------------------------------------------------------

def cmd_validate_schedule(args) -> int:
    cfg, grid, schedule, out = _setup(args)
    rep = beta_validate(schedule, raise_on_failure=False)
    print(rep.summary())
    if not rep.ok:
        f = rep.failure
        print(f"condition {f.condition} violated on wall {f.wall}, face {f.face}, t = {f.time}",
              file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_run(args) -> int:
    cfg, grid, schedule, out = _setup(args)
    beta_validate(schedule)
    u0 = _initial_field(cfg, grid)
    s = cfg.solver
    h = cfg.hash()
    if not s.nonlinear:
        traj = solve_linear(u0, None, schedule, s.tau_s, s.dt_s, tol=s.linear_tol)
        write_diagnostics(out / "diagnostics.csv", _diagnostic_rows(traj), h)
        _write_snapshots(out, traj, None, cfg.output.cadence_steps, h)
        print(f"linear run finished: {traj.n_steps} steps, output in {out}")
        return EXIT_OK
    constants = _constants(cfg, schedule, args.cache_constants)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            traj, pressure, report = picard_solve(u0, schedule, s.tau_s, s.dt_s, tol=s.picard_tol,
                                                  max_iter=s.picard_max_iter, constants=constants)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except PicardDivergence as exc:
        (out / "picard_report.txt").write_text(exc.report.summary() + "\n")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    write_diagnostics(out / "diagnostics.csv", _diagnostic_rows(traj), h)
    _write_snapshots(out, traj, pressure.pi, cfg.output.cadence_steps, h)
    summary = report.summary() + f"\n  config_hash: {h.hex()}\n  version: {__version__}\n"
    (out / "picard_report.txt").write_text(summary)
    print(summary, end="")
    return EXIT_OK


def cmd_estimate_constants(args) -> int:
    cfg, grid, schedule, out = _setup(args)
    beta_validate(schedule)
    s = cfg.solver
    cdt = s.constants_dt_s or s.dt_s * max(1, int(round(s.tau_s / s.dt_s / 50)))
    c = estimate_constants(schedule, s.tau_s, cdt, ensemble=s.ensemble, seed=s.seed)
    path = Path(args.cache_constants) if args.cache_constants else out / "constants.json"
    _write_constants(path, c, cfg, grid)
    print(json.dumps(c.as_dict(), sort_keys=True))
    return EXIT_OK


def _orders(errors) -> list:
    out = [None]
    for a, b in zip(errors[:-1], errors[1:]):
        out.append(float(np.log2(a / b)) if a > 0 and b > 0 else None)
    return out


def cmd_convergence(args) -> int:
    cfg, grid0, schedule0, out = _setup(args)
    if cfg.initial_condition.preset != "taylor-green":
        raise ConfigError(f"preset {cfg.initial_condition.preset!r} has no analytic solution; "
                          "the convergence study needs 'taylor-green'")
    levels = int(args.levels or 3)
    if levels < 1:
        raise CommandError("--levels must be at least 1")
    s = cfg.solver
    amp = cfg.initial_condition.amplitude
    rows = []
    for k in range(levels):
        counts = [n * 2**k if grid0.is_wall(a) else n for a, n in enumerate(grid0.counts)]
        grid = build_grid(grid0.lengths, counts, grid0.kinds)
        schedule = cfg.schedule.build(grid)
        beta_validate(schedule)
        if any(np.abs(v).max() > 0 for seg in schedule.start for v in seg.values() if v.size):
            raise ConfigError("the Taylor-Green study needs beta = 0")
        dt = s.dt_s / 2**k
        u0 = taylor_green(grid, amp)
        if s.nonlinear:
            traj, pressure, _ = picard_solve(u0, schedule, s.tau_s, dt, tol=s.picard_tol,
                                             max_iter=s.picard_max_iter, estimate=False)
        else:
            traj, pressure = solve_linear(u0, None, schedule, s.tau_s, dt, tol=s.linear_tol), None
        lam, lam_h = taylor_green_eigenvalue(grid), taylor_green_eigenvalue(grid, discrete=True)
        n0 = dc.norm_H(grid, u0)
        steps = np.arange(traj.n_steps + 1)
        # spatial: against the backward-Euler recursion with the exact eigenvalue
        spat = max(dc.norm_H(grid, u - (1 + lam * dt) ** (-n) * u0) for n, u in zip(steps, traj.states)) / n0
        # temporal: against the exact time evolution of the discrete eigenfunction
        temp = dc.norm_H(grid, traj.states[-1] - np.exp(-lam_h * traj.tau) * u0) / n0
        vel = max(dc.norm_H(grid, u - np.exp(-lam * t) * u0) for t, u in zip(traj.times, traj.states)) / n0
        perr = float("nan")
        if pressure is not None and amp != 0:
            errs = []
            for t, pi in zip(traj.times, pressure.pi):
                pa = taylor_green_pressure(grid, amp, t)
                errs.append(np.sqrt(dc.inner(grid, pi - pa, pi - pa, "cell") / dc.inner(grid, pa, pa, "cell")))
            perr = float(max(errs))
        rows.append({"level": k, "counts": "x".join(map(str, counts)), "h": min(grid.spacing[a] for a in
                     grid.wall_axes), "dt": dt, "spatial_error": spat, "temporal_error": temp,
                     "velocity_error": vel, "pressure_error": perr})
    so = _orders([r["spatial_error"] for r in rows])
    to = _orders([r["temporal_error"] for r in rows])
    cols = ["level", "counts", "h", "dt", "spatial_error", "spatial_order", "temporal_error",
            "temporal_order", "velocity_error", "pressure_error"]
    lines = [f"# config_hash: {cfg.hash().hex()}", f"# version: {__version__}", ",".join(cols)]
    for r, a, b in zip(rows, so, to):
        r["spatial_order"] = "" if a is None else repr(a)
        r["temporal_order"] = "" if b is None else repr(b)
        lines.append(",".join(str(r[c]) if isinstance(r[c], str) else repr(r[c]) for c in cols))
    (out / "convergence.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines[2:]))
    return EXIT_OK


def cmd_decompose(args) -> int:
    header, u = read_field(args.field)
    if header.field_kind != FIELD_FACE:
        raise CommandError("decompose needs a face (velocity) field")
    if args.config:
        grid = load_config(args.config).grid.build()
        if not header.matches(grid):
            raise CommandError("field file does not match the configured grid")
    else:
        grid = grid_from_header(header)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    Pu, p, _ = project(grid, u)
    gp = dc.grad(grid, p)
    # wall-normal entries are not part of either component
    resid = np.where(dc.operators(grid).face_interior, u - Pu - gp, 0.0)
    report = {"inner_Pu_gradp": dc.inner(grid, Pu, gp), "recomposition_error": dc.norm_H(grid, resid),
              "norm_u": dc.norm_H(grid, u), "norm_Pu": dc.norm_H(grid, Pu), "norm_gradp": dc.norm_H(grid, gp),
              "wall_normal_discarded": float(np.abs(u[~dc.operators(grid).face_interior]).max(initial=0.0))}
    write_field(out / "Pu.rnsf", grid, Pu, FIELD_FACE, header.time, header.config_hash)
    write_field(out / "gradp.rnsf", grid, gp, FIELD_FACE, header.time, header.config_hash)
    (out / "decompose_report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robinns",
                                     description="Navier-Stokes with Robin (Navier-slip) walls on a MAC grid.")
    parser.add_argument("--version", action="version", version=f"robinns {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, levels=False, cache=False):
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=int, metavar="N")
        if levels:
            p.add_argument("--levels", type=int, metavar="N", default=3)
        if cache:
            p.add_argument("--cache-constants", metavar="PATH")
        return p

    for name in ("run", "picard"):
        common(sub.add_parser(name, help="Picard solve of the nonlinear problem"), cache=True) \
            .set_defaults(func=cmd_run)
    common(sub.add_parser("convergence", help="Taylor-Green refinement study"), levels=True) \
        .set_defaults(func=cmd_convergence)
    common(sub.add_parser("estimate-constants", help="empirical C_MR, C1, C2, delta, eps"), cache=True) \
        .set_defaults(func=cmd_estimate_constants)
    common(sub.add_parser("validate-schedule", help="check a Robin schedule")) \
        .set_defaults(func=cmd_validate_schedule)
    p = sub.add_parser("decompose", help="Helmholtz split of a stored velocity field")
    p.add_argument("field", metavar="FIELD")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=cmd_decompose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except ScheduleError as exc:
        print(f"error: schedule invalid: {exc} (wall {exc.wall}, face {exc.face}, t = {exc.time})",
              file=sys.stderr)
    except (ConfigError, CommandError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
