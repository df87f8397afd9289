"""Command-line entry point.

    cisim <eigs|localization|curve|phase-diagram|dynamics> [--config FILE] [--set section.key=value ...] [--out DIR]

Every subcommand writes CSV files plus ``manifest.json`` into the output
directory. Exit codes: 0 success, 1 configuration error, 2 solver failure.

CSV schemas (all files start with a ``#`` comment block carrying the config
hash, followed by a header row):

    eigs.csv            kind, index, energy, residual, group, parity
    localization.csv    kind, index, energy, P, P_subspace
    curve.csv           delta, one_minus_P, energy, gap
    critical.csv        gamma, delta_inflection, delta_tangent, slope, bandwidth, delta_min_gap, min_gap
    phase_diagram.csv   gamma, delta_inflection, delta_tangent, slope, bandwidth
    trace_<K>_T<T>.csv  t, P
    dynamics.csv        kind, T, members, t_half, norm_drift, energy_drift
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, config_hash, parse_config
from .dynamics import donor_boltzmann, transfer_trace
from .errors import CisimError, ConfigError
from .grid import make_grid
from .localization import (
    critical_deltas,
    delocalization_curve,
    localization_P,
    make_projector,
    phase_diagram,
    subspace_localization,
)
from .operators import build
from .spectra import lowest_eigenpairs, parity_character

log = logging.getLogger("cisim")

SUBCOMMANDS = ("eigs", "localization", "curve", "phase-diagram", "dynamics")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Run:
    """Output directory, CSV writer and manifest bookkeeping for one invocation."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.run.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.hash = config_hash(cfg)
        self.tasks = []
        self.files = {}

    def write_csv(self, name: str, columns, rows, meta: dict | None = None) -> Path:
        path = self.out / name
        lines = [f"# cisim {__version__} {self.command}", f"# config_hash: {self.hash}"]
        for key, value in (meta or {}).items():
            lines.append(f"# {key}: {value}")
        lines.append(",".join(columns))
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
        path.write_text("\n".join(lines) + "\n")
        self.files[name] = hashlib.sha256(path.read_bytes()).hexdigest()
        return path

    def task(self, name: str, fn, *args):
        t0 = time.perf_counter()
        status = "ok"
        try:
            return fn(*args)
        except CisimError as exc:
            status = f"failed: {exc}"
            raise
        finally:
            self.tasks.append({"name": name, "status": status, "wall_time": time.perf_counter() - t0})
            log.info("%s %s (%.1f s)", name, status, self.tasks[-1]["wall_time"])

    def write_manifest(self, status: str):
        manifest = {
            "tool": "cisim",
            "version": __version__,
            "command": self.command,
            "status": status,
            "config_hash": self.hash,
            "config": self.cfg.as_dict(),
            "tasks": self.tasks,
            "checksums": dict(sorted(self.files.items())),
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _grid(cfg: RunConfig, p, nx=None, ny=None):
    g = cfg.grid
    return make_grid(p, nx or g.nx, ny or g.ny, g.padding, energy_cap=g.energy_cap, extents=g.extents)


def _solve(cfg, kind, p, grid):
    s = cfg.solver
    H = build(kind, p, grid, order=cfg.grid.order)
    return lowest_eigenpairs(H, s.m, s.tol, s.seed, degeneracy_tol=s.degeneracy_tol)


def cmd_eigs(run: Run) -> None:
    cfg = run.cfg
    p = cfg.params()
    grid = _grid(cfg, p)
    rows = []
    for kind in cfg.solver.kinds:
        res = run.task(f"eigs:{kind}", _solve, cfg, kind, p, grid)
        for gid, group in enumerate(res.degeneracy_groups):
            for i in group:
                try:
                    par = parity_character(res.eigenfields[i], kind, p)
                except ValueError:
                    par = float("nan")
                rows.append([kind, i, res.eigenvalues[i], res.residual_norms[i], gid, round(par, 12)])
    run.write_csv("eigs.csv", ["kind", "index", "energy", "residual", "group", "parity"], rows,
                  {"params": p, "grid": grid.as_dict()})


def cmd_localization(run: Run) -> None:
    cfg = run.cfg
    p = cfg.params()
    grid = _grid(cfg, p)
    mask = make_projector(p, grid)
    rows = []
    for kind in cfg.solver.kinds:
        res = run.task(f"localization:{kind}", _solve, cfg, kind, p, grid)
        for group in res.degeneracy_groups:
            sub = subspace_localization(res, group, mask)[0] if len(group) <= 2 else float("nan")
            for i in group:
                rows.append([kind, i, res.eigenvalues[i], localization_P(res.eigenfields[i], mask), sub])
    run.write_csv("localization.csv", ["kind", "index", "energy", "P", "P_subspace"], rows,
                  {"params": p, "grid": grid.as_dict(), "x_sep": mask.x_sep})


def _curve_kw(cfg: RunConfig) -> dict:
    s = cfg.solver
    return dict(state=cfg.sweep.state, state_selector=cfg.sweep.selector, nx=cfg.grid.nx, ny=cfg.grid.ny,
                m=s.m, tol=s.tol, seed=s.seed, degeneracy_tol=s.degeneracy_tol, order=cfg.grid.order)


def cmd_curve(run: Run) -> None:
    cfg = run.cfg
    p = cfg.params()
    deltas = cfg.delta_grid()
    kind = cfg.sweep.kind
    curve = run.task(f"curve:{kind}", lambda: delocalization_curve(kind, p, p.gamma, deltas, **_curve_kw(cfg)))
    diagram = curve.diagram
    state = cfg.sweep.state
    offset = len(curve.deltas) - len(diagram.deltas)
    energy = np.full(len(curve.deltas), np.nan)
    gap = np.full(len(curve.deltas), np.nan)
    picks = diagram.selected(state, cfg.sweep.selector)
    rows_idx = np.arange(len(picks))
    energy[offset:] = np.where(picks >= 0, diagram.energies[rows_idx, np.maximum(picks, 0)], np.nan)
    gap[offset:] = diagram.neighbour_gap(state, selector=cfg.sweep.selector)
    rows = [[d, v, e, g] for d, v, e, g in zip(curve.deltas, curve.values, energy, gap)]
    meta = {"kind": kind, "gamma": p.gamma, "state": state, "selector": cfg.sweep.selector}
    run.write_csv("curve.csv", ["delta", "one_minus_P", "energy", "gap"], rows, meta)

    crit = run.task("critical", critical_deltas, curve.deltas, curve.values)
    d_gap, min_gap = diagram.min_gap(state, selector=cfg.sweep.selector)
    run.write_csv(
        "critical.csv",
        ["gamma", "delta_inflection", "delta_tangent", "slope", "bandwidth", "delta_min_gap", "min_gap"],
        [[p.gamma, crit.delta_inflection, crit.delta_tangent, crit.slope, crit.bandwidth, d_gap, min_gap]],
        meta,
    )


def cmd_phase_diagram(run: Run) -> None:
    cfg = run.cfg
    p = cfg.params()
    kind = cfg.sweep.kind
    points = run.task(
        f"phase-diagram:{kind}",
        lambda: phase_diagram(kind, p, cfg.sweep.gammas, cfg.delta_grid(), **_curve_kw(cfg)),
    )
    rows = [[c.gamma, c.delta_inflection, c.delta_tangent, c.slope, c.bandwidth] for c in points]
    run.write_csv("phase_diagram.csv", ["gamma", "delta_inflection", "delta_tangent", "slope", "bandwidth"],
                  rows, {"kind": kind, "state": cfg.sweep.state})


def cmd_dynamics(run: Run) -> None:
    cfg = run.cfg
    d = cfg.dynamics
    p = cfg.params()
    grid = _grid(cfg, p, d.nx, d.ny)
    times = np.linspace(0.0, d.t_max, d.samples)
    summary = []
    for T in d.temperatures:
        ens = run.task(f"ensemble:T={T}", lambda: donor_boltzmann(p, grid, T, d.eps, order=cfg.grid.order,
                                                                   seed=cfg.solver.seed))
        for kind in cfg.solver.kinds:
            tr = run.task(
                f"dynamics:{kind}:T={T}",
                lambda: transfer_trace(kind, p, grid, T, times, ensemble=ens, tol=d.tol,
                                       dress=d.gp_dress_initial, order=cfg.grid.order, seed=cfg.solver.seed),
            )
            meta = {"kind": kind, "params": p, "T": T, "members": len(ens), "grid": grid.as_dict(),
                    "tol": d.tol, "eps": d.eps, "gp_dress_initial": d.gp_dress_initial}
            run.write_csv(f"trace_{kind}_T{T:g}.csv", ["t", "P"], tr.to_rows(), meta)
            summary.append([kind, T, len(ens), tr.first_crossing(), tr.norm_drift, tr.energy_drift])
    run.write_csv("dynamics.csv", ["kind", "T", "members", "t_half", "norm_drift", "energy_drift"], summary)


COMMANDS = {
    "eigs": cmd_eigs,
    "localization": cmd_localization,
    "curve": cmd_curve,
    "phase-diagram": cmd_phase_diagram,
    "dynamics": cmd_dynamics,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cisim", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("--config", default=None, help="config file (INI sections or a manifest.json)")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    ap.add_argument("--out", default=None, help="output directory (overrides run.out)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.overrides)
    if args.out is not None:
        overrides.append(f"run.out={args.out}")
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"cisim: config error: {exc}", file=sys.stderr)
        return 1

    run = Run(cfg, args.command)
    try:
        COMMANDS[args.command](run)
    except CisimError as exc:
        run.write_manifest("failed")
        print(f"cisim: solver failure: {exc}", file=sys.stderr)
        return 2
    run.write_manifest("ok")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
