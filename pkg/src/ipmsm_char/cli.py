"""Command-line entry point: plan, characterize, map, envelope, cycle."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .drivecycle import evaluate_cycle, read_cycle, synthetic_urban_profile, write_cycle_result
from .errors import CharacterizationError, ConfigError
from .fluxmap import SyntheticMachine, ensure_completed, read_flux_map, write_flux_map
from .mapgen import (CostModel, build_efficiency_map, characterize_lut, default_workers,
                     estimate_runtime, format_duration, lut_grid, plan_sweep,
                     write_efficiency_map)
from .solver import OperatingPointSolver

FLUXMAP_FILE = "fluxmap.csv"
MANIFEST_FILE = "manifest.json"
MAP_FILE = "efficiency_map.csv"
ENVELOPE_FILE = "envelope.csv"
CYCLE_FILE = "cycle_result.csv"


class _Run:
    def __init__(self, cfg: RunConfig, args):
        self.cfg = cfg
        self.workers = args.workers or default_workers()
        self.out = Path(args.out).resolve() if args.out else cfg.output_dir
        self.seed = args.seed

    @property
    def header(self):
        return [f"config_hash={self.cfg.config_hash}", f"ipmsm_char {__version__}"]

    def out_file(self, name):
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name

    def load_lut(self):
        path = self.out / FLUXMAP_FILE
        if not path.exists():
            raise CharacterizationError(f"{path} not found; run 'characterize' first")
        return ensure_completed(read_flux_map(path))

    def solver(self, lut=None):
        return OperatingPointSolver(lut if lut is not None else self.load_lut(),
                                    self.cfg.machine, self.cfg.solver)


def cmd_plan(run: _Run):
    cfg = run.cfg
    plan = plan_sweep(cfg.sweep.n_i, cfg.sweep.n_beta, cfg.machine.i_max)
    cores = cfg.sweep.cores or run.workers
    serial, parallel = estimate_runtime(plan, CostModel(cfg.sweep.n_designs,
                                                        cfg.sweep.seconds_per_job, cores))
    print(f"jobs per design (n_j): {plan.n_jobs}")
    print(f"  n_i={cfg.sweep.n_i} amplitudes, n_beta={cfg.sweep.n_beta} angles")
    print(f"serial estimate ({cfg.sweep.n_designs} designs x "
          f"{cfg.sweep.seconds_per_job:g} s/job): {format_duration(serial)}")
    print(f"parallel estimate ({cores} cores, ideal speedup): {format_duration(parallel)}")
    return 0


def _sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_characterize(run: _Run):
    cfg = run.cfg
    if cfg.synthetic is not None:
        n_id = cfg.sweep.lut_id_points or cfg.sweep.n_beta
        n_iq = cfg.sweep.lut_iq_points or cfg.sweep.n_i
        if n_id < 2:
            raise ConfigError("sweep.lut_id_points must be >= 2 (n_beta is too small "
                              "to serve as the default)")
        id_grid, iq_grid = lut_grid(cfg.machine.i_max, n_id, n_iq)
        lut = characterize_lut(SyntheticMachine(cfg.synthetic), id_grid, iq_grid,
                               cfg.skew, run.workers)
        source = "synthetic"
    else:
        lut = ensure_completed(read_flux_map(cfg.fluxmap_path))
        source = "external"
    fm_path = run.out_file(FLUXMAP_FILE)
    write_flux_map(fm_path, lut, run.header)
    manifest = {
        "config_hash": cfg.config_hash,
        "package_version": __version__,
        "source": source,
        "fluxmap_csv": FLUXMAP_FILE,
        "fluxmap_sha256": _sha256_file(fm_path),
        "n_id": len(lut.id_grid),
        "n_iq": len(lut.iq_grid),
        "rows": len(lut.id_grid) * len(lut.iq_grid),
        "skew_slices": cfg.skew.n_slices,
        "skew_total_el_rad": cfg.skew.total_skew_el,
    }
    run.out_file(MANIFEST_FILE).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"characterized {manifest['rows']} LUT nodes "
          f"({manifest['n_id']} Id x {manifest['n_iq']} Iq) -> {fm_path}")
    return 0


def _map_grids(cfg, solver):
    g = cfg.grids
    speeds = np.linspace(g.n_max_per_min / g.n_speeds, g.n_max_per_min, g.n_speeds) / 60.0
    m_top = g.torque_max_Nm if g.torque_max_Nm is not None else solver.torque_capability
    torques = np.linspace(-m_top, m_top, g.n_torques)
    return speeds, torques


def cmd_map(run: _Run):
    cfg = run.cfg
    lut = run.load_lut()
    speeds, torques = _map_grids(cfg, run.solver(lut))
    emap = build_efficiency_map(lut, cfg.machine, cfg.losses, speeds, torques,
                                cfg.solver, run.workers)
    path = run.out_file(MAP_FILE)
    write_efficiency_map(path, emap, run.header)
    n_feas = int(emap.feasible.sum())
    print(f"feasible cells: {n_feas}/{emap.feasible.size} "
          f"({n_feas / emap.feasible.size:.3f})")
    if n_feas:
        masked = np.where(emap.feasible, emap.eta, -np.inf)
        t, s = np.unravel_index(int(np.argmax(masked)), masked.shape)
        print(f"peak eta: {emap.eta[t, s]:.4f} at n={speeds[s] * 60:.1f} 1/min, "
              f"M={torques[t]:.2f} Nm")
    print(f"wrote {path}")
    return 0


def cmd_envelope(run: _Run):
    cfg = run.cfg
    solver = run.solver()
    speeds = np.linspace(0.0, cfg.grids.n_max_per_min, cfg.grids.n_speeds) / 60.0
    points = solver.envelope(speeds.tolist())
    path = run.out_file(ENVELOPE_FILE)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in run.header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_per_min", "torque_max_Nm", "feasible"])
        for p in points:
            w.writerow([repr(float(p.speed_n * 60.0)),
                        repr(float(p.torque_max)) if p.feasible else "", int(p.feasible)])
    feas = [p for p in points if p.feasible]
    print(f"envelope: {len(feas)}/{len(points)} feasible speeds, "
          f"M_max(0)={points[0].torque_max:.2f} Nm")
    print(f"wrote {path}")
    return 0


def cmd_cycle(run: _Run):
    cfg = run.cfg
    if cfg.vehicle is None:
        raise ConfigError("the 'cycle' command needs a 'vehicle' block")
    if cfg.cycle.csv_path is not None:
        cycle = read_cycle(cfg.cycle.csv_path)
    else:
        cycle = synthetic_urban_profile(cfg.cycle.duration_s, cfg.cycle.seed)
    res = evaluate_cycle(cycle, cfg.vehicle, run.solver(), cfg.losses)
    path = run.out_file(CYCLE_FILE)
    write_cycle_result(path, res, run.header)
    print(f"energy in {res.energy_in:.4f} Wh, out {res.energy_out:.4f} Wh, "
          f"recuperated {res.energy_recuperated:.4f} Wh")
    print(f"cycle efficiency: {res.cycle_efficiency:.4f}, "
          f"infeasible steps: {res.infeasible_step_count}")
    print(f"wrote {path}")
    return 0


COMMANDS = {"plan": cmd_plan, "characterize": cmd_characterize, "map": cmd_map,
            "envelope": cmd_envelope, "cycle": cmd_cycle}


def build_parser():
    ap = argparse.ArgumentParser(prog="ipmsm-char",
                                 description="IPMSM characterization and analysis pipeline")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--workers", type=int, default=None,
                       help="worker count (default: available cores)")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved for stochastic features; currently unused")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        run = _Run(load_config(args.config), args)
        return COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CharacterizationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
