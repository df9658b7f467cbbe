"""Drive-cycle evaluation on a characterized machine.

Each sampling interval is treated as an independent steady operating point
at the interval-average speed; thermal state is frozen.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NegativeSpeed, NonMonotonicTime
from .losses import LossesConfig
from .mapgen import point_losses
from .solver import OperatingPointSolver

GRAVITY = 9.81
JOULE_PER_WH = 3600.0


@dataclass(frozen=True, eq=False)
class DriveCycle:
    time: np.ndarray    # s
    speed: np.ndarray   # vehicle speed, m/s

    def __len__(self):
        return len(self.time)


def load_cycle(rows) -> DriveCycle:
    """Validate ``(t_s, v_mps)`` rows; no resampling."""
    data = np.array([[float(a), float(b)] for a, b in rows], dtype=float)
    if data.ndim != 2 or len(data) < 2:
        raise ValueError("a drive cycle needs at least two samples")
    t, v = data[:, 0], data[:, 1]
    if np.any(np.diff(t) <= 0):
        k = int(np.argmax(np.diff(t) <= 0))
        raise NonMonotonicTime(f"time does not increase after sample {k} (t={t[k]} s)")
    if np.any(v < 0):
        k = int(np.argmax(v < 0))
        raise NegativeSpeed(f"negative speed {v[k]} m/s at sample {k}")
    return DriveCycle(t, v)


def read_cycle(path) -> DriveCycle:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader, [])]
    if header != ["t_s", "v_mps"]:
        raise ValueError(f"{path}: expected header t_s,v_mps")
    return load_cycle(reader)


def synthetic_urban_profile(duration_s: int = 1800, seed: int = 0) -> DriveCycle:
    """Stop-and-go 1 Hz profile of accelerate / cruise / brake / idle phases.

    Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    v = []
    while len(v) < duration_s:
        v_top = rng.uniform(8.0, 16.0)
        t_acc = int(rng.integers(6, 15))
        t_cruise = int(rng.integers(5, 40))
        t_brake = int(rng.integers(5, 12))
        t_idle = int(rng.integers(3, 15))
        v += list(np.linspace(0.0, v_top, t_acc + 1)[:-1])
        v += [v_top] * t_cruise
        v += list(np.linspace(v_top, 0.0, t_brake + 1)[:-1])
        v += [0.0] * t_idle
    v = np.array(v[:duration_s])
    v[-1] = 0.0
    return DriveCycle(np.arange(duration_s, dtype=float), v)


@dataclass(frozen=True)
class VehicleParams:
    """
    Longitudinal vehicle model.

    ``drag_area`` is the product of drag coefficient and frontal area (m²);
    ``driveline_efficiency`` lumps gearbox and driveline losses.
    """
    mass: float
    rolling_coeff: float
    drag_area: float
    air_density: float
    wheel_radius: float
    gear_ratio: float
    driveline_efficiency: float = 1.0

    def __post_init__(self):
        if not (self.mass > 0 and self.wheel_radius > 0 and self.gear_ratio > 0):
            raise ValueError("mass, wheel radius and gear ratio must be > 0")
        if not 0 < self.driveline_efficiency <= 1:
            raise ValueError("driveline_efficiency must be in (0, 1]")
        if min(self.rolling_coeff, self.drag_area, self.air_density) < 0:
            raise ValueError("resistance coefficients must be >= 0")


def wheel_demand(cycle: DriveCycle, vp: VehicleParams, step_index: int):
    """Shaft speed (1/s) and torque (Nm) over interval ``step_index``."""
    if not 0 <= step_index < len(cycle) - 1:
        raise IndexError(f"step_index {step_index} outside [0, {len(cycle) - 1})")
    k = step_index
    dt = cycle.time[k + 1] - cycle.time[k]
    v0, v1 = cycle.speed[k], cycle.speed[k + 1]
    v = 0.5 * (v0 + v1)
    force = vp.mass * (v1 - v0) / dt + 0.5 * vp.air_density * vp.drag_area * v * v
    if v > 0:
        force += vp.mass * GRAVITY * vp.rolling_coeff
    m_wheel = force * vp.wheel_radius
    if m_wheel >= 0:
        m_shaft = m_wheel / (vp.gear_ratio * vp.driveline_efficiency)
    else:
        m_shaft = m_wheel * vp.driveline_efficiency / vp.gear_ratio
    n = v * vp.gear_ratio / (2 * math.pi * vp.wheel_radius)
    return float(n), float(m_shaft)


@dataclass(frozen=True)
class StepRecord:
    t: float          # interval start (s)
    dt: float
    n: float          # 1/s
    torque: float     # delivered torque (Nm), clamped if infeasible
    torque_demand: float
    feasible: bool
    p_mech: float     # W, positive when motoring
    p_loss: float
    eta: float

    @property
    def p_el(self):
        """Electrical power drawn by the machine (negative when recuperating)."""
        return self.p_mech + self.p_loss


@dataclass(frozen=True)
class DriveCycleResult:
    """Per-interval records and their aggregates.

    Motoring intervals (``p_mech >= 0``) contribute ``energy_in`` (electrical)
    and ``energy_out`` (mechanical).  Braking intervals contribute
    ``energy_braking`` (mechanical input) and ``energy_recuperated``
    (electrical output, negative where losses exceed the braking power).
    ``cycle_efficiency`` is ``energy_out / energy_in``.  Energies in Wh.
    """
    records: tuple
    energy_in: float
    energy_out: float
    energy_recuperated: float
    energy_braking: float
    loss_drive: float
    loss_braking: float
    cycle_efficiency: float
    infeasible_step_count: int


def aggregate(records: Sequence[StepRecord]) -> DriveCycleResult:
    e_in = e_out = e_rec = e_brake = l_drive = l_brake = 0.0
    for r in records:
        if r.p_mech >= 0:
            e_in += r.p_el * r.dt
            e_out += r.p_mech * r.dt
            l_drive += r.p_loss * r.dt
        else:
            e_brake += -r.p_mech * r.dt
            e_rec += -r.p_el * r.dt
            l_brake += r.p_loss * r.dt
    eff = e_out / e_in if e_in > 0 else 0.0
    h = JOULE_PER_WH
    return DriveCycleResult(tuple(records), e_in / h, e_out / h, e_rec / h, e_brake / h,
                            l_drive / h, l_brake / h, eff,
                            sum(1 for r in records if not r.feasible))


def evaluate_cycle(cycle: DriveCycle, vp: VehicleParams, solver: OperatingPointSolver,
                   losses: LossesConfig) -> DriveCycleResult:
    """
    Resolve every interval on the machine and integrate energies.

    Demands beyond the capability are clamped to the envelope torque at that
    speed and flagged; if even zero torque is infeasible the interval
    delivers nothing and is flagged.
    """
    records = []
    envelope = {}
    for k in range(len(cycle) - 1):
        t, dt = float(cycle.time[k]), float(cycle.time[k + 1] - cycle.time[k])
        n, m_dem = wheel_demand(cycle, vp, k)
        if n == 0 and m_dem == 0:
            records.append(StepRecord(t, dt, 0.0, 0.0, 0.0, True, 0.0, 0.0, 0.0))
            continue
        m = m_dem
        c = solver.try_field_weakening(m, n)
        feasible = c is not None
        if c is None:
            if n not in envelope:
                envelope[n] = solver.max_torque(n)
            m_max = envelope[n]
            if m_max < 0:
                records.append(StepRecord(t, dt, n, 0.0, m_dem, False, 0.0, 0.0, 0.0))
                continue
            m = math.copysign(m_max, m_dem)
            c = solver.try_field_weakening(m, n)
        lb = point_losses(solver, losses, c, n, m)
        records.append(StepRecord(t, dt, n, m, m_dem, feasible,
                                  2 * math.pi * n * m, lb.p_total, lb.eta))
    return aggregate(records)


RESULT_HEADER = ["t_s", "dt_s", "n_per_min", "torque_Nm", "torque_demand_Nm",
                 "feasible", "p_mech_W", "p_loss_W", "eta"]


def write_cycle_result(path, res: DriveCycleResult, header_lines=()):
    """Per-interval rows followed by a ``#`` summary block."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in res.records:
            w.writerow([repr(r.t), repr(r.dt), repr(r.n * 60.0), repr(r.torque),
                        repr(r.torque_demand), int(r.feasible), repr(r.p_mech),
                        repr(r.p_loss), repr(r.eta)])
        for key in ("energy_in", "energy_out", "energy_recuperated", "energy_braking",
                    "loss_drive", "loss_braking"):
            fh.write(f"# {key}_Wh={getattr(res, key)!r}\n")
        fh.write(f"# cycle_efficiency={res.cycle_efficiency!r}\n")
        fh.write(f"# infeasible_step_count={res.infeasible_step_count}\n")
