"""Machine constants, dq quantities and coordinate transforms.

Angles are radians internally.  Phase waveforms carry electrical angles in
degrees because that is how they are written to and read from disk.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BadSpan, NonFiniteValue, NonUniformGrid

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DcResistanceParams:
    """Winding data for the DC resistance.

    Parameters
    ----------
    sigma_0 : float
        Conductivity at the reference temperature (S/m).
    alpha : float
        Linear temperature coefficient (1/K).
    t_ref : float
        Reference temperature (K).
    conductor_length : float
        Total conductor length per phase (m).
    conductor_area : float
        Conductor cross section (m²).
    """
    sigma_0: float
    alpha: float
    t_ref: float
    conductor_length: float
    conductor_area: float


@dataclass(frozen=True)
class AcResistanceParams:
    """Empirical current-displacement fit, ``R_ac = R_dc * l_eff/l_c * a * f**b``."""
    l_eff: float
    coeff_a: float
    exp_b: float


@dataclass(frozen=True)
class MachineParams:
    """
    Electrical constants and operating limits of the machine.

    Parameters
    ----------
    pole_pairs : int
        Number of pole pairs.
    psi_pm : float
        Permanent-magnet flux linkage (Vs).
    l_d, l_q : float
        d- and q-axis inductances (H). Only the synthetic model and the
        linear torque check use them.
    l_sigma_ew : float
        End-winding stray inductance (H).
    r_dc_params : DcResistanceParams
    r_ac_params : AcResistanceParams
    i_max : float
        Maximum phase current amplitude (A).
    u_dc : float
        DC-bus voltage (V).
    """
    pole_pairs: int
    psi_pm: float
    l_d: float
    l_q: float
    l_sigma_ew: float
    r_dc_params: DcResistanceParams
    r_ac_params: AcResistanceParams
    i_max: float
    u_dc: float

    def __post_init__(self):
        if int(self.pole_pairs) != self.pole_pairs or self.pole_pairs < 1:
            raise ValueError("pole_pairs must be an integer >= 1")
        r = self.r_dc_params
        positive = {
            "conductor_length": r.conductor_length,
            "conductor_area": r.conductor_area,
            "sigma_0": r.sigma_0,
            "l_eff": self.r_ac_params.l_eff,
            "i_max": self.i_max,
            "u_dc": self.u_dc,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value}")
        if self.l_d < 0 or self.l_q < self.l_d:
            raise ValueError("expected l_q >= l_d >= 0")
        if self.l_sigma_ew < 0:
            raise ValueError("l_sigma_ew must be >= 0")


@dataclass(frozen=True)
class DqValue:
    """A rotor-frame pair; units depend on context (A, Vs or V)."""
    d: float
    q: float

    def __post_init__(self):
        if not (math.isfinite(self.d) and math.isfinite(self.q)):
            raise NonFiniteValue(f"non-finite dq components ({self.d}, {self.q})")

    @property
    def magnitude(self) -> float:
        return math.hypot(self.d, self.q)


@dataclass(frozen=True)
class CurrentPolar:
    """Current phasor as amplitude (A) and angle from the d-axis (rad)."""
    amplitude: float
    beta: float

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        object.__setattr__(self, "beta", normalize_angle(self.beta))


def normalize_angle(angle):
    """Wrap an angle into [0, 2π)."""
    a = math.fmod(angle, TWO_PI)
    if a < 0:
        a += TWO_PI
    # fmod of a value just below 0 can land exactly on 2π after the shift
    return 0.0 if a >= TWO_PI else a


def dq_from_polar(c: CurrentPolar) -> DqValue:
    # "+ 0.0" turns a signed zero (cos(π)·0) into +0.0
    return DqValue(c.amplitude * math.cos(c.beta) + 0.0,
                   c.amplitude * math.sin(c.beta) + 0.0)


def polar_from_dq(v: DqValue) -> CurrentPolar:
    """Inverse of :func:`dq_from_polar`; the zero vector gets ``beta = 0``."""
    amplitude = math.hypot(v.d, v.q)
    if amplitude == 0.0:
        return CurrentPolar(0.0, 0.0)
    return CurrentPolar(amplitude, math.atan2(v.q, v.d))


def park_transform(phase_values, electrical_angle: float) -> DqValue:
    """
    Amplitude-invariant Park transform of one (a, b, c) sample.

    A balanced set ``x_k = X cos(θ + α - k·120°)`` maps to
    ``(X cos α, X sin α)`` for every rotor angle θ.
    """
    a, b, c = phase_values
    th = electrical_angle
    shift = TWO_PI / 3.0
    d = (2.0 / 3.0) * (a * math.cos(th) + b * math.cos(th - shift)
                       + c * math.cos(th + shift))
    q = -(2.0 / 3.0) * (a * math.sin(th) + b * math.sin(th - shift)
                        + c * math.sin(th + shift))
    return DqValue(d, q)


def electrical_frequency(n: float, p: int) -> float:
    """Electrical angular frequency (rad/s) for mechanical speed ``n`` (1/s)."""
    return TWO_PI * n * p


def electrical_frequency_hz(n: float, p: int) -> float:
    return n * p


def mechanical_rotation_span(gamma_el: float, p: int) -> float:
    """Mechanical rotation (deg) that covers ``gamma_el`` electrical degrees."""
    if p < 1 or not gamma_el > 0:
        raise ValueError("need p >= 1 and gamma_el > 0")
    return gamma_el / p


@dataclass(frozen=True)
class PhaseWaveforms:
    """Phase flux linkages (Vs) sampled over electrical angle (deg)."""
    angles: np.ndarray
    psi_a: np.ndarray
    psi_b: np.ndarray
    psi_c: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(x, dtype=float) for x in
                  (self.angles, self.psi_a, self.psi_b, self.psi_c)]
        for name, arr in zip(("angles", "psi_a", "psi_b", "psi_c"), arrays):
            object.__setattr__(self, name, arr)
        n = len(arrays[0])
        if n < 2 or any(len(x) != n for x in arrays):
            raise ValueError("waveform sequences need equal lengths >= 2")
        if np.any(np.diff(arrays[0]) <= 0):
            raise ValueError("angles must be strictly ascending")
        if not all(np.all(np.isfinite(x)) for x in arrays):
            raise NonFiniteValue("waveforms contain non-finite samples")

    def phases(self) -> np.ndarray:
        return np.vstack([self.psi_a, self.psi_b, self.psi_c])


_SEGMENT_DEG = 60.0


def reconstruct_full_period(sixth: PhaseWaveforms) -> PhaseWaveforms:
    """
    Extend phase flux linkages sampled on [0°, 60°] to one electrical period.

    Segment ``k`` (covering ``[60k, 60k + 60)``) takes phase ``j`` from input
    phase ``(j + k) mod 3`` and flips its sign on odd ``k``; i.e. over
    [60°, 120°) ``Ψa = -Ψb``, ``Ψb = -Ψc``, ``Ψc = -Ψa`` of the base segment.
    This direction is the one that reproduces ``Ψx = cos(γ - φx)`` with
    ``φ = (0°, 120°, 240°)``.

    The result lives on ``[0°, 360°)`` with the input step.  Samples of the
    first segment are returned unchanged; the input sample at 60° itself is
    superseded by segment 1, which starts there.
    """
    ang = sixth.angles
    steps = np.diff(ang)
    step = (ang[-1] - ang[0]) / (len(ang) - 1)
    if np.max(np.abs(steps - step)) > 1e-9 * max(step, 1.0):
        raise NonUniformGrid("angle step is not uniform")
    if abs(ang[0]) > 1e-9 or abs(ang[-1] - _SEGMENT_DEG) > 1e-9:
        raise BadSpan(f"expected span [0, 60] deg, got [{ang[0]}, {ang[-1]}]")
    m = len(ang) - 1
    base = sixth.phases()[:, :m]
    base_ang = ang[:m]

    out = np.empty((3, 6 * m))
    out_ang = np.empty(6 * m)
    for k in range(6):
        sign = -1.0 if k % 2 else 1.0
        sl = slice(k * m, (k + 1) * m)
        out_ang[sl] = base_ang + _SEGMENT_DEG * k
        for j in range(3):
            out[j, sl] = sign * base[(j + k) % 3]
    return PhaseWaveforms(out_ang, out[0], out[1], out[2])


def waveforms_to_dq(wf: PhaseWaveforms, angle_offset_deg: float = 0.0):
    """Park-transform every sample; returns arrays ``(psi_d, psi_q)``."""
    th = np.deg2rad(wf.angles + angle_offset_deg)
    shift = TWO_PI / 3.0
    a, b, c = wf.phases()
    d = (2.0 / 3.0) * (a * np.cos(th) + b * np.cos(th - shift) + c * np.cos(th + shift))
    q = -(2.0 / 3.0) * (a * np.sin(th) + b * np.sin(th - shift) + c * np.sin(th + shift))
    return d, q


WAVEFORM_HEADER = ["gamma_el_deg", "psi_a", "psi_b", "psi_c"]


def read_phase_waveforms(path) -> PhaseWaveforms:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or [h.strip() for h in rows[0]] != WAVEFORM_HEADER:
        raise ValueError(f"{path}: expected header {','.join(WAVEFORM_HEADER)}")
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    if data.ndim != 2 or data.shape[1] != 4:
        raise ValueError(f"{path}: expected four columns")
    return PhaseWaveforms(data[:, 0], data[:, 1], data[:, 2], data[:, 3])


def write_phase_waveforms(path, wf: PhaseWaveforms, header_lines: Sequence[str] = ()):
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WAVEFORM_HEADER)
        for row in zip(wf.angles, wf.psi_a, wf.psi_b, wf.psi_c):
            w.writerow([repr(float(x)) for x in row])
