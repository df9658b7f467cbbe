"""Sweep planning, parallel characterization and efficiency-map assembly."""
from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BadRange, CharacterizationError, JobFailed
from .fluxmap import (FluxMap, MapSource, SkewSpec, build_from_samples,
                      complete_by_symmetry, skew_average)
from .losses import LossesConfig, loss_breakdown
from .machine import CurrentPolar, DqValue, MachineParams, dq_from_polar, polar_from_dq
from .solver import OperatingPointSolver, SolverSettings


@dataclass(frozen=True)
class SweepPlan:
    amplitude_steps: int
    angle_steps: int
    beta_range: tuple
    amplitude_range: tuple
    jobs: tuple

    @property
    def n_jobs(self):
        return len(self.jobs)


def job_count(n_i, n_beta):
    """Jobs per design: the zero-current point is simulated once."""
    return (n_i - 1) * n_beta + 1


def plan_sweep(n_i: int, n_beta: int, i_max: float,
               beta_min: float = 0.5 * math.pi, beta_max: float = math.pi) -> SweepPlan:
    """
    Current sweep on a uniform amplitude grid ``[0, i_max]`` and a uniform
    angle grid on ``(beta_min, beta_max]``.
    """
    if n_i < 2 or n_beta < 1:
        raise BadRange("need n_i >= 2 and n_beta >= 1")
    if not i_max > 0 or not beta_max > beta_min:
        raise BadRange("need i_max > 0 and beta_max > beta_min")
    amps = [i_max * k / (n_i - 1) for k in range(n_i)]
    amps[-1] = i_max
    step = (beta_max - beta_min) / n_beta
    betas = [beta_min + (k + 1) * step for k in range(n_beta)]
    betas[-1] = beta_max
    jobs = [CurrentPolar(0.0, beta_max)]
    jobs += [CurrentPolar(a, b) for a in amps[1:] for b in betas]
    return SweepPlan(n_i, n_beta, (beta_min, beta_max), (0.0, i_max), tuple(jobs))


@dataclass(frozen=True)
class CostModel:
    n_designs: int
    seconds_per_job: float
    cores: int = 1

    def __post_init__(self):
        if self.n_designs < 1 or not self.seconds_per_job > 0 or self.cores < 1:
            raise ValueError("cost model fields must be positive")


def estimate_runtime(plan, cost: CostModel):
    """Serial and ideal-speedup parallel wall time (s) for all designs."""
    n_j = plan.n_jobs if isinstance(plan, SweepPlan) else int(plan)
    serial = cost.n_designs * n_j * cost.seconds_per_job
    return serial, serial / cost.cores


def format_duration(seconds: float) -> str:
    minutes = int(round(seconds / 60.0))
    return f"{minutes // 60} h {minutes % 60} min"


# -- parallel job runner -----------------------------------------------------

def default_workers():
    return os.cpu_count() or 1


def run_ordered(fn, items, workers=None, processes=False):
    """Apply ``fn`` to ``items`` on a fixed-size pool; results keep item order."""
    items = list(items)
    workers = workers or default_workers()
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    pool_cls = ProcessPoolExecutor if processes else ThreadPoolExecutor
    with pool_cls(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True, eq=False)
class Characterization:
    """Flux linkages at every job, in job order."""
    currents: tuple     # DqValue per job
    psi_d: np.ndarray
    psi_q: np.ndarray

    def rows(self):
        return [(c.d, c.q, float(a), float(b))
                for c, a, b in zip(self.currents, self.psi_d, self.psi_q)]

    def to_flux_map(self, source=MapSource.SYNTHETIC) -> FluxMap:
        """Assemble into a table; the jobs must form a complete rectangle."""
        return build_from_samples(self.rows(), source=source)


class _JobEvaluator:
    def __init__(self, source, skew, job_delay):
        self.source = source
        self.skew = skew
        self.job_delay = job_delay

    def __call__(self, job):
        if self.job_delay:
            time.sleep(self.job_delay)
        try:
            if isinstance(job, DqValue):
                if self.skew.n_slices == 1:
                    return self.source.psi_at(job.d, job.q)
                job = polar_from_dq(job)
            psi = skew_average(self.source, self.skew, job)
            return psi.d, psi.q
        except CharacterizationError as exc:
            return exc


def run_characterization(source, jobs, skew: SkewSpec = None, workers=None,
                         job_delay: float = 0.0) -> Characterization:
    """
    Evaluate flux linkages at every planned current.

    ``source`` is anything with ``psi_at(id, iq)``.  ``jobs`` is a
    :class:`SweepPlan` or a sequence of ``CurrentPolar`` / ``DqValue``.
    The result does not depend on ``workers``; failures of individual jobs
    are collected and raised together as :class:`JobFailed`.
    ``job_delay`` adds an artificial per-job cost in seconds.
    """
    if isinstance(jobs, SweepPlan):
        jobs = jobs.jobs
    jobs = list(jobs)
    evaluator = _JobEvaluator(source, skew or SkewSpec(), job_delay)
    results = run_ordered(evaluator, jobs, workers)
    currents = [j if isinstance(j, DqValue) else dq_from_polar(j) for j in jobs]
    failures = [(k, c.d, c.q, str(r)) for k, (c, r) in enumerate(zip(currents, results))
                if isinstance(r, Exception)]
    if failures:
        raise JobFailed(failures)
    return Characterization(tuple(currents),
                            np.array([r[0] for r in results], dtype=float),
                            np.array([r[1] for r in results], dtype=float))


def lut_grid(i_max, n_id, n_iq):
    """Node axes of the analysis LUT covering Id in [-i_max, 0], Iq in [0, i_max]."""
    id_grid = np.linspace(-i_max, 0.0, n_id)
    iq_grid = np.linspace(0.0, i_max, n_iq)
    id_grid[-1] = 0.0
    iq_grid[0] = 0.0
    return id_grid, iq_grid


def characterize_lut(source, id_grid, iq_grid, skew=None, workers=None,
                     source_kind=MapSource.SYNTHETIC) -> FluxMap:
    """Characterize the Iq >= 0 quadrant on a rectangular grid and mirror it."""
    if iq_grid[0] != 0:
        raise BadRange("iq_grid must start at 0")
    jobs = [DqValue(float(d), float(q)) for d in id_grid for q in iq_grid]
    char = run_characterization(source, jobs, skew, workers)
    shape = (len(id_grid), len(iq_grid))
    half = FluxMap(id_grid, iq_grid, char.psi_d.reshape(shape), char.psi_q.reshape(shape),
                   source=source_kind)
    return complete_by_symmetry(half)


# -- efficiency map -------------------------------------------------------

LOSS_KEYS = ("p_cu_dc", "p_cu_ac", "p_fe", "p_fr")


@dataclass(frozen=True, eq=False)
class EfficiencyMap:
    """Per-cell results; matrices have shape ``(len(torque_grid), len(speed_grid))``.

    Infeasible cells hold NaN and ``feasible`` False.
    """
    speed_grid: np.ndarray
    torque_grid: np.ndarray
    eta: np.ndarray
    feasible: np.ndarray
    loss_maps: dict
    id_map: np.ndarray
    iq_map: np.ndarray
    markers: np.ndarray
    torque_max: np.ndarray   # envelope per speed (NaN if even zero torque fails)


@dataclass(frozen=True)
class CellResult:
    feasible: bool
    current: CurrentPolar = None
    eta: float = math.nan
    losses: tuple = (math.nan,) * 4
    marker: str = "infeasible"


def evaluate_cell(solver: OperatingPointSolver, losses: LossesConfig, n, M, m_max=None):
    """Set-point, losses and efficiency at one (n, M) demand."""
    if m_max is not None and abs(M) > m_max:
        return CellResult(False)
    c = solver.try_field_weakening(M, n)
    if c is None:
        return CellResult(False)
    lb = point_losses(solver, losses, c, n, M)
    return CellResult(True, c, lb.eta, (lb.p_cu_dc, lb.p_cu_ac, lb.p_fe, lb.p_fr),
                      lb.marker.value)


def point_losses(solver, losses, c: CurrentPolar, n, M):
    d = c.amplitude * math.cos(c.beta)
    q = c.amplitude * math.sin(c.beta)
    psd, psq = solver.fmap.psi_at(d, q)
    temp = solver.settings.winding_temperature
    if temp is None:
        temp = solver.mp.r_dc_params.t_ref
    return loss_breakdown(losses, solver.mp, c.amplitude, math.hypot(psd, psq), n, M, temp)


def _map_row(args):
    lut, mp, losses, settings, n, torques = args
    solver = OperatingPointSolver(lut, mp, settings)
    m_max = solver.max_torque(n)
    cells = [evaluate_cell(solver, losses, n, M, m_max) for M in torques]
    return m_max, cells


def build_efficiency_map(lut: FluxMap, mp: MachineParams, losses: LossesConfig,
                         speed_grid: Sequence[float], torque_grid: Sequence[float],
                         settings: SolverSettings = None, workers=None) -> EfficiencyMap:
    """
    Evaluate every (speed, torque) cell; negative torques are generator cells.

    Rows are distributed over worker processes by speed.
    """
    speed_grid = np.asarray(speed_grid, float)
    torque_grid = np.asarray(torque_grid, float)
    for g, name in ((speed_grid, "speed_grid"), (torque_grid, "torque_grid")):
        if g.ndim != 1 or len(g) < 1 or np.any(np.diff(g) <= 0):
            raise BadRange(f"{name} must be a non-empty ascending sequence")
    if speed_grid[0] < 0:
        raise BadRange("speeds must be >= 0")
    settings = settings or SolverSettings()
    OperatingPointSolver(lut, mp, settings)  # fail fast on domain problems
    tasks = [(lut, mp, losses, settings, float(n), torque_grid.tolist()) for n in speed_grid]
    rows = run_ordered(_map_row, tasks, workers, processes=True)

    shape = (len(torque_grid), len(speed_grid))
    eta = np.full(shape, np.nan)
    feas = np.zeros(shape, bool)
    loss_maps = {k: np.full(shape, np.nan) for k in LOSS_KEYS}
    id_map = np.full(shape, np.nan)
    iq_map = np.full(shape, np.nan)
    markers = np.full(shape, "infeasible", dtype=object)
    torque_max = np.empty(len(speed_grid))
    for s, (m_max, cells) in enumerate(rows):
        torque_max[s] = m_max if m_max >= 0 else np.nan
        for t, cell in enumerate(cells):
            markers[t, s] = cell.marker
            if not cell.feasible:
                continue
            feas[t, s] = True
            eta[t, s] = cell.eta
            for k, v in zip(LOSS_KEYS, cell.losses):
                loss_maps[k][t, s] = v
            id_map[t, s] = cell.current.amplitude * math.cos(cell.current.beta)
            iq_map[t, s] = cell.current.amplitude * math.sin(cell.current.beta)
    return EfficiencyMap(speed_grid, torque_grid, eta, feas, loss_maps, id_map, iq_map,
                         markers, torque_max)


EFFICIENCY_HEADER = ["n_per_min", "torque_Nm", "eta", "p_cu_dc_W", "p_cu_ac_W",
                     "p_fe_W", "p_fr_W", "id_A", "iq_A", "feasible"]


def _fmt(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_efficiency_map(path, emap: EfficiencyMap, header_lines=()):
    """Torque-major rows; infeasible cells leave the numeric columns empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EFFICIENCY_HEADER)
        for t, M in enumerate(emap.torque_grid):
            for s, n in enumerate(emap.speed_grid):
                ok = bool(emap.feasible[t, s])
                vals = [emap.eta[t, s]] + [emap.loss_maps[k][t, s] for k in LOSS_KEYS] \
                    + [emap.id_map[t, s], emap.iq_map[t, s]]
                w.writerow([repr(float(n * 60.0)), repr(float(M))]
                           + [_fmt(v) if ok else "" for v in vals] + [int(ok)])


def read_efficiency_map_rows(path):
    """Parse an efficiency-map CSV into dicts (numeric fields as float or None)."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        rec = {k: (float(v) if v != "" else None) for k, v in row.items() if k != "feasible"}
        rec["feasible"] = row["feasible"] == "1"
        out.append(rec)
    return out
