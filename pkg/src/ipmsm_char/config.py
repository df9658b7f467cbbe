"""JSON run configuration.

One document holds every block; its canonical hash tags all outputs.
Keys carry their units.  Errors report the line of the offending key.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .drivecycle import VehicleParams
from .errors import ConfigError
from .fluxmap import SkewSpec, SyntheticModelParams
from .losses import (CoreLossCoefficients, CoreRegion, FrictionCoefficients,
                     LossesConfig, MECHANISMS, WaveformSample, read_waveforms)
from .machine import AcResistanceParams, DcResistanceParams, MachineParams
from .solver import SolverSettings


@dataclass(frozen=True)
class SweepConfig:
    n_i: int = 20
    n_beta: int = 12
    n_designs: int = 1
    seconds_per_job: float = 35.0
    cores: int = None
    lut_id_points: int = None    # defaults to n_beta
    lut_iq_points: int = None    # defaults to n_i


@dataclass(frozen=True)
class GridConfig:
    n_max_per_min: float = 12000.0
    n_speeds: int = 50
    n_torques: int = 50
    torque_max_Nm: float = None  # defaults to the torque capability


@dataclass(frozen=True)
class CycleConfig:
    csv_path: Path = None        # None -> synthetic urban profile
    duration_s: int = 1800
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    machine: MachineParams
    synthetic: SyntheticModelParams
    fluxmap_path: Path
    losses: LossesConfig
    winding_temperature: float
    sweep: SweepConfig
    grids: GridConfig
    skew: SkewSpec
    solver: SolverSettings
    vehicle: VehicleParams
    cycle: CycleConfig
    output_dir: Path
    config_hash: str = field(default="", compare=False)


class _Doc:
    """Key lookup that knows the source line of every key."""

    def __init__(self, text):
        self.text = text

    def line_of(self, path):
        pos = 0
        for key in path:
            if isinstance(key, int):
                continue
            m = re.compile(r'"%s"\s*:' % re.escape(key)).search(self.text, pos)
            if m is None:
                break
            pos = m.start()
        return self.text.count("\n", 0, pos) + 1

    def error(self, path, message):
        where = ".".join(str(p) for p in path) or "<root>"
        return ConfigError(f"{where}: {message}", line=self.line_of(path))


def _get(doc, block, path, key, kind=float, default=..., allow_none=False):
    p = path + (key,)
    if key not in block:
        if default is ...:
            raise doc.error(path, f"missing required key '{key}'")
        return default
    value = block[key]
    if value is None and allow_none:
        return None
    try:
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise ValueError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind is str:
            if not isinstance(value, str):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise doc.error(p, f"expected {kind.__name__}, got {value!r}") from None
    return value


def _block(doc, parent, path, key, required=True):
    if key not in parent:
        if required:
            raise doc.error(path, f"missing required block '{key}'")
        return None
    value = parent[key]
    if not isinstance(value, dict):
        raise doc.error(path + (key,), "expected an object")
    return value


def _build(doc, path, ctor, *args, **kwargs):
    try:
        return ctor(*args, **kwargs)
    except (ValueError, TypeError) as exc:
        raise doc.error(path, str(exc)) from None


def canonical_hash(data) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", line=1)
    return parse_config(data, text, base_dir=path.parent)


def parse_config(data, text=None, base_dir=Path(".")) -> RunConfig:
    doc = _Doc(text if text is not None else json.dumps(data, indent=2))
    root = ()

    m = _block(doc, data, root, "machine")
    mpath = ("machine",)
    rdc = _block(doc, m, mpath, "r_dc")
    rac = _block(doc, m, mpath, "r_ac")
    dcp = _build(doc, mpath + ("r_dc",), DcResistanceParams,
                 _get(doc, rdc, mpath + ("r_dc",), "sigma_0_S_per_m"),
                 _get(doc, rdc, mpath + ("r_dc",), "alpha_per_K"),
                 _get(doc, rdc, mpath + ("r_dc",), "t_ref_K"),
                 _get(doc, rdc, mpath + ("r_dc",), "conductor_length_m"),
                 _get(doc, rdc, mpath + ("r_dc",), "conductor_area_m2"))
    acp = _build(doc, mpath + ("r_ac",), AcResistanceParams,
                 _get(doc, rac, mpath + ("r_ac",), "l_eff_m"),
                 _get(doc, rac, mpath + ("r_ac",), "coeff_a"),
                 _get(doc, rac, mpath + ("r_ac",), "exp_b"))
    machine = _build(doc, mpath, MachineParams,
                     _get(doc, m, mpath, "pole_pairs", int),
                     _get(doc, m, mpath, "psi_pm_Vs"),
                     _get(doc, m, mpath, "l_d_H", default=0.0),
                     _get(doc, m, mpath, "l_q_H", default=0.0),
                     _get(doc, m, mpath, "l_sigma_ew_H", default=0.0),
                     dcp, acp,
                     _get(doc, m, mpath, "i_max_A"),
                     _get(doc, m, mpath, "u_dc_V"))

    has_syn, has_map = "synthetic" in data, "fluxmap_path" in data
    if has_syn == has_map:
        raise doc.error(root, "exactly one of 'synthetic' or 'fluxmap_path' is required")
    synthetic = fluxmap_path = None
    if has_syn:
        s = _block(doc, data, root, "synthetic")
        sp = ("synthetic",)

        def knee(key):
            v = _get(doc, s, sp, key, default=None, allow_none=True)
            return math.inf if v is None else v
        synthetic = _build(doc, sp, SyntheticModelParams,
                           _get(doc, s, sp, "psi_pm_Vs", default=machine.psi_pm),
                           _get(doc, s, sp, "l_d0_H", default=machine.l_d),
                           _get(doc, s, sp, "l_q0_H", default=machine.l_q),
                           knee("i_sat_d_A"), knee("i_sat_q_A"),
                           _get(doc, s, sp, "sat_exponent", default=2.0))
    else:
        fluxmap_path = (base_dir / _get(doc, data, root, "fluxmap_path", str)).resolve()
        if not fluxmap_path.exists():
            raise doc.error(("fluxmap_path",), f"file not found: {fluxmap_path}")

    losses, temperature = _parse_losses(doc, data, base_dir, machine)

    sw = _block(doc, data, root, "sweep", required=False) or {}
    swp = ("sweep",)
    sweep = SweepConfig(
        n_i=_get(doc, sw, swp, "n_i", int, 20),
        n_beta=_get(doc, sw, swp, "n_beta", int, 12),
        n_designs=_get(doc, sw, swp, "n_designs", int, 1),
        seconds_per_job=_get(doc, sw, swp, "seconds_per_job", float, 35.0),
        cores=_get(doc, sw, swp, "cores", int, None),
        lut_id_points=_get(doc, sw, swp, "lut_id_points", int, None),
        lut_iq_points=_get(doc, sw, swp, "lut_iq_points", int, None))
    if sweep.n_i < 2 or sweep.n_beta < 1:
        raise doc.error(swp, "need n_i >= 2 and n_beta >= 1")
    for key in ("lut_id_points", "lut_iq_points"):
        v = getattr(sweep, key)
        if v is not None and v < 2:
            raise doc.error(swp + (key,), "need at least 2 points")

    g = _block(doc, data, root, "grids", required=False) or {}
    gp = ("grids",)
    grids = GridConfig(
        n_max_per_min=_get(doc, g, gp, "n_max_per_min", float, 12000.0),
        n_speeds=_get(doc, g, gp, "n_speeds", int, 50),
        n_torques=_get(doc, g, gp, "n_torques", int, 50),
        torque_max_Nm=_get(doc, g, gp, "torque_max_Nm", float, None))
    if grids.n_speeds < 1 or grids.n_torques < 1 or not grids.n_max_per_min > 0:
        raise doc.error(gp, "grid sizes and n_max_per_min must be positive")

    sk = _block(doc, data, root, "skew", required=False)
    if sk is None:
        skew = SkewSpec()
    else:
        skew = _build(doc, ("skew",), SkewSpec,
                      _get(doc, sk, ("skew",), "n_slices", int),
                      math.radians(_get(doc, sk, ("skew",), "total_skew_el_deg")))

    so = _block(doc, data, root, "solver", required=False) or {}
    sop = ("solver",)
    solver = _build(doc, sop, SolverSettings,
                    beta_grid_points=_get(doc, so, sop, "beta_grid_points", int, 16),
                    refine_tolerance=_get(doc, so, sop, "refine_tolerance", float, 1e-4),
                    voltage_tolerance=_get(doc, so, sop, "voltage_tolerance_V", float, 1e-6),
                    max_iterations=_get(doc, so, sop, "max_iterations", int, 200),
                    winding_temperature=temperature,
                    voltage_model_resistance=_get(doc, so, sop, "voltage_model_resistance",
                                                  str, "dc_plus_ac"),
                    voltage_limit_factor=_get(doc, so, sop, "voltage_limit_factor",
                                              float, 2.0 / math.pi))

    vehicle = None
    v = _block(doc, data, root, "vehicle", required=False)
    if v is not None:
        vp = ("vehicle",)
        vehicle = _build(doc, vp, VehicleParams,
                         _get(doc, v, vp, "mass_kg"),
                         _get(doc, v, vp, "rolling_coeff"),
                         _get(doc, v, vp, "drag_area_m2"),
                         _get(doc, v, vp, "air_density_kg_per_m3", float, 1.2),
                         _get(doc, v, vp, "wheel_radius_m"),
                         _get(doc, v, vp, "gear_ratio"),
                         _get(doc, v, vp, "driveline_efficiency", float, 1.0))

    c = _block(doc, data, root, "cycle", required=False) or {}
    cp = ("cycle",)
    csv_path = _get(doc, c, cp, "csv_path", str, None)
    if csv_path is not None:
        csv_path = (base_dir / csv_path).resolve()
        if not csv_path.exists():
            raise doc.error(cp + ("csv_path",), f"file not found: {csv_path}")
    cycle = CycleConfig(csv_path, _get(doc, c, cp, "duration_s", int, 1800),
                        _get(doc, c, cp, "seed", int, 0))

    out = _get(doc, data, root, "output_dir", str, "out")
    return RunConfig(machine, synthetic, fluxmap_path, losses, temperature, sweep, grids,
                     skew, solver, vehicle, cycle, (base_dir / out).resolve(),
                     config_hash=canonical_hash(data))


def _parse_losses(doc, data, base_dir, machine):
    lo = _block(doc, data, (), "losses", required=False) or {}
    lp = ("losses",)
    temperature = _get(doc, lo, lp, "winding_temperature_K", float,
                       machine.r_dc_params.t_ref)
    core_b = _block(doc, lo, lp, "core", required=False) or {}
    cp = lp + ("core",)
    core = _build(doc, cp, CoreLossCoefficients,
                  _get(doc, core_b, cp, "k_h", float, 0.0),
                  _get(doc, core_b, cp, "k_c", float, 0.0),
                  _get(doc, core_b, cp, "k_e", float, 0.0),
                  _get(doc, core_b, cp, "f_0_Hz", float, 50.0))
    shapes = {}
    wf_csv = _get(doc, lo, lp, "waveform_csv", str, None)
    if wf_csv is not None:
        wf_path = (base_dir / wf_csv).resolve()
        try:
            shapes = {w.region_id: w for w in read_waveforms(wf_path)}
        except (OSError, ValueError) as exc:
            raise doc.error(lp + ("waveform_csv",), str(exc)) from None
    regions = []
    raw_regions = lo.get("regions", [])
    if not isinstance(raw_regions, list):
        raise doc.error(lp + ("regions",), "expected a list")
    for k, r in enumerate(raw_regions):
        rp = lp + ("regions", k)
        if not isinstance(r, dict):
            raise doc.error(rp, "expected an object")
        rid = _get(doc, r, rp, "region_id", str)
        shape = shapes.get(rid)
        if wf_csv is not None and shape is None:
            raise doc.error(rp, f"no waveform for region '{rid}' in {wf_csv}")
        if shape is not None:
            shape = WaveformSample(rid, shape.b_samples, 1.0 / core.f_0)
        regions.append(CoreRegion(rid, _get(doc, r, rp, "weight_kg"),
                                  _get(doc, r, rp, "b_per_flux_T_per_Vs"), shape))
    fr = _block(doc, lo, lp, "friction", required=False) or {}
    frp = lp + ("friction",)
    friction = _build(doc, frp, FrictionCoefficients,
                      _get(doc, fr, frp, "k_r1", float, 0.0),
                      _get(doc, fr, frp, "k_r2", float, 0.0),
                      _get(doc, fr, frp, "k_r3", float, 0.0))
    mech = lo.get("mechanisms", sorted(MECHANISMS))
    if not isinstance(mech, list) or not set(mech) <= MECHANISMS:
        raise doc.error(lp + ("mechanisms",), f"expected a subset of {sorted(MECHANISMS)}")
    losses = _build(doc, lp, LossesConfig, core, tuple(regions), friction, frozenset(mech))
    return losses, temperature
