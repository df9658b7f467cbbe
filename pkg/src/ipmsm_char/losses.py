"""Conduction, core and friction losses, and efficiency per operating point."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import BadExponent, NonPhysical, TooFewSamples
from .machine import AcResistanceParams, DcResistanceParams

# Bertotti excess-loss constant, used verbatim
EXCESS_CONSTANT = 8.76
MIN_WAVEFORM_SAMPLES = 8


def rms_from_amplitude(amplitude):
    """Sinusoidal phase current RMS value from its amplitude."""
    return amplitude / math.sqrt(2.0)


def dc_resistance(params: DcResistanceParams, temperature: float) -> float:
    """Phase DC resistance (Ω) at winding temperature ``temperature`` (K)."""
    if not temperature > 0:
        raise NonPhysical(f"temperature must be > 0 K, got {temperature}")
    r0 = params.conductor_length / (params.sigma_0 * params.conductor_area)
    r = r0 * (1.0 + params.alpha * (temperature - params.t_ref))
    if not r > 0:
        raise NonPhysical(f"DC resistance {r:.3g} Ω at T={temperature} K is not positive")
    return r


def ac_resistance(params: AcResistanceParams, conductor_length: float,
                  r_dc: float, f: float) -> float:
    """Additional resistance from current displacement at frequency ``f`` (Hz)."""
    if params.exp_b < 0:
        raise BadExponent(f"exponent b must be >= 0, got {params.exp_b}")
    if f < 0:
        raise ValueError("frequency must be >= 0")
    if f == 0 and params.exp_b > 0:
        return 0.0
    return r_dc * (params.l_eff / conductor_length) * params.coeff_a * f ** params.exp_b


def conduction_loss(r_dc_params: DcResistanceParams, r_ac_params: AcResistanceParams,
                    i_s_amplitude: float, temperature: float, f: float):
    """
    Three-phase conduction loss split into DC and AC parts (W).

    The current argument is the phase amplitude; the loss uses the RMS value.
    """
    if i_s_amplitude < 0:
        raise ValueError("current amplitude must be >= 0")
    r_dc = dc_resistance(r_dc_params, temperature)
    r_ac = ac_resistance(r_ac_params, r_dc_params.conductor_length, r_dc, f)
    i2 = rms_from_amplitude(i_s_amplitude) ** 2
    return 3.0 * r_dc * i2, 3.0 * r_ac * i2


@dataclass(frozen=True)
class CoreLossCoefficients:
    """
    Iron-loss material coefficients.

    With ``B`` in T and ``f`` in Hz, ``k_h`` is in W/(T²·Hz), ``k_c`` in
    W·s²/T² and ``k_e`` in W·(s/T)^1.5, all per unit of the region weight
    (typically kg).  ``f_0`` is the frequency of the reference waveform.
    """
    k_h: float
    k_c: float
    k_e: float
    f_0: float

    def __post_init__(self):
        if min(self.k_h, self.k_c, self.k_e) < 0 or not self.f_0 > 0:
            raise ValueError("core-loss coefficients must be >= 0 and f_0 > 0")


@dataclass(frozen=True)
class FrictionCoefficients:
    k_r1: float = 0.0
    k_r2: float = 0.0
    k_r3: float = 0.0

    def __post_init__(self):
        if min(self.k_r1, self.k_r2, self.k_r3) < 0:
            raise ValueError("friction coefficients must be >= 0")


@dataclass(frozen=True, eq=False)
class WaveformSample:
    """
    Flux density of one region over one reference period.

    ``b_samples`` are uniform in time over ``period`` seconds (the last
    sample is one step before the period closes).
    """
    region_id: str
    b_samples: np.ndarray
    period: float
    b_max: float = None

    def __post_init__(self):
        b = np.array(self.b_samples, dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "b_samples", b)
        peak = float(np.max(np.abs(b))) if b.size else 0.0
        if self.b_max is None:
            object.__setattr__(self, "b_max", peak)
        elif abs(self.b_max - peak) > 1e-12:
            raise ValueError(f"b_max={self.b_max} disagrees with max|B|={peak}")
        if not self.period > 0:
            raise ValueError("period must be > 0")


def sinusoidal_waveform(region_id, b_max, f_0, n_samples=256):
    t = np.arange(n_samples) / (n_samples * f_0)
    return WaveformSample(region_id, b_max * np.sin(2 * math.pi * f_0 * t), 1.0 / f_0)


def bdot_alpha(w: WaveformSample, alpha: float, method: str = "spectral") -> float:
    """
    Period average of ``|dB/dt|**alpha`` ((T/s)**alpha).

    The derivative is taken spectrally (exact for band-limited periodic
    data) or by periodic central differences.  The uniform periodic grid
    makes the trapezoidal rule a plain mean.
    """
    b = w.b_samples
    n = len(b)
    if n < MIN_WAVEFORM_SAMPLES:
        raise TooFewSamples(f"need >= {MIN_WAVEFORM_SAMPLES} samples, got {n}")
    dt = w.period / n
    if method == "spectral":
        spectrum = np.fft.rfft(b)
        k = np.arange(len(spectrum))
        if n % 2 == 0:
            spectrum[-1] = 0.0  # Nyquist term has no well-defined derivative
        dbdt = np.fft.irfft(1j * 2 * math.pi * k / w.period * spectrum, n)
    elif method == "central":
        dbdt = (np.roll(b, -1) - np.roll(b, 1)) / (2 * dt)
    else:
        raise ValueError(f"unknown differentiation method {method!r}")
    return float(np.mean(np.abs(dbdt) ** alpha))


def core_loss(coeffs: CoreLossCoefficients, w: WaveformSample, f: float,
              method: str = "spectral") -> float:
    """Core loss (W per unit weight) of the reference waveform scaled to ``f``."""
    if f < 0:
        raise ValueError("frequency must be >= 0")
    if f == 0:
        return 0.0
    r = f / coeffs.f_0
    return (coeffs.k_h * w.b_max ** 2 * f
            + coeffs.k_c / (2 * math.pi ** 2) * bdot_alpha(w, 2.0, method) * r ** 2
            + coeffs.k_e / EXCESS_CONSTANT * bdot_alpha(w, 1.5, method) * r ** 1.5)


def core_loss_regions(coeffs: CoreLossCoefficients, waveforms: Sequence[WaveformSample],
                      weights: Mapping[str, float], f: float) -> float:
    """Weighted sum of per-region core losses."""
    return sum(weights[w.region_id] * core_loss(coeffs, w, f) for w in waveforms)


def friction_loss(coeffs: FrictionCoefficients, f: float) -> float:
    """Bearing and windage loss (W) at mechanical rotation frequency ``f`` (Hz)."""
    if f < 0:
        raise ValueError("frequency must be >= 0")
    return coeffs.k_r1 * f + coeffs.k_r2 * f ** 2 + coeffs.k_r3 * f ** 3


class EtaMarker(enum.Enum):
    OK = "ok"
    DEFINED_AS_ZERO = "defined_as_zero"   # recuperated power fully dissipated
    ZERO_OUTPUT = "zero_output"           # no mechanical power, losses only
    STALL = "stall"                       # n = 0 with torque


def efficiency(n: float, M: float, p_loss: float):
    """
    Efficiency and a marker for the degenerate cases.

    Motor operation (M > 0) uses output over electrical input; generator
    operation (M < 0) uses electrical output over mechanical input, clamped
    at zero when the losses eat all of it.
    """
    if p_loss < 0:
        raise ValueError("p_loss must be >= 0")
    p_mech = 2 * math.pi * n * M
    if M != 0 and n == 0:
        return 0.0, EtaMarker.STALL
    if p_mech == 0:
        return 0.0, EtaMarker.ZERO_OUTPUT
    if p_mech > 0:
        return p_mech / (p_mech + p_loss), EtaMarker.OK
    eta = (p_mech + p_loss) / p_mech
    if eta <= 0:
        return 0.0, EtaMarker.DEFINED_AS_ZERO
    return eta, EtaMarker.OK


@dataclass(frozen=True)
class LossBreakdown:
    p_cu_dc: float
    p_cu_ac: float
    p_fe: float
    p_fr: float
    p_total: float
    eta: float
    marker: EtaMarker = EtaMarker.OK


@dataclass(frozen=True)
class CoreRegion:
    """Core-loss region: mass (or volume) weight and flux-density shape.

    The peak flux density is ``b_per_flux * |Ψ|`` of the operating point.
    ``shape`` is a reference waveform normalized to unit peak; ``None``
    means a sinusoid.
    """
    region_id: str
    weight: float
    b_per_flux: float
    shape: WaveformSample = None


MECHANISMS = frozenset({"cu", "fe", "fr"})


@dataclass(frozen=True)
class LossesConfig:
    core: CoreLossCoefficients
    regions: tuple = ()
    friction: FrictionCoefficients = FrictionCoefficients()
    mechanisms: frozenset = MECHANISMS
    _unit_bdot: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        unknown = set(self.mechanisms) - MECHANISMS
        if unknown:
            raise ValueError(f"unknown loss mechanisms {sorted(unknown)}")
        object.__setattr__(self, "regions", tuple(self.regions))
        # 𝔅_α scales as B_max**α, so evaluate each unit-peak shape once
        cache = []
        for reg in self.regions:
            shape = reg.shape or sinusoidal_waveform(reg.region_id, 1.0, self.core.f_0)
            if shape.b_max <= 0:
                raise ValueError(f"region {reg.region_id}: waveform is identically zero")
            unit = WaveformSample(reg.region_id, shape.b_samples / shape.b_max, shape.period)
            cache.append((bdot_alpha(unit, 2.0), bdot_alpha(unit, 1.5)))
        object.__setattr__(self, "_unit_bdot", tuple(cache))

    def core_loss_at(self, psi_magnitude: float, f: float) -> float:
        """Core loss over all regions for flux magnitude (Vs) at frequency (Hz)."""
        if f <= 0 or "fe" not in self.mechanisms:
            return 0.0
        c = self.core
        r = f / c.f_0
        total = 0.0
        for reg, (u2, u15) in zip(self.regions, self._unit_bdot):
            b = reg.b_per_flux * psi_magnitude
            total += reg.weight * (c.k_h * b * b * f
                                   + c.k_c / (2 * math.pi ** 2) * u2 * b ** 2 * r ** 2
                                   + c.k_e / EXCESS_CONSTANT * u15 * b ** 1.5 * r ** 1.5)
        return total


def loss_breakdown(losses: LossesConfig, mp, amplitude: float, psi_magnitude: float,
                   n: float, M: float, temperature: float) -> LossBreakdown:
    """Losses and efficiency at one resolved operating point.

    ``mp`` is a :class:`~ipmsm_char.machine.MachineParams`; ``n`` in 1/s.
    """
    f_el = n * mp.pole_pairs
    if "cu" in losses.mechanisms:
        p_dc, p_ac = conduction_loss(mp.r_dc_params, mp.r_ac_params, amplitude,
                                     temperature, f_el)
    else:
        p_dc = p_ac = 0.0
    p_fe = losses.core_loss_at(psi_magnitude, f_el)
    p_fr = friction_loss(losses.friction, n) if "fr" in losses.mechanisms else 0.0
    total = p_dc + p_ac + p_fe + p_fr
    eta, marker = efficiency(n, M, total)
    return LossBreakdown(p_dc, p_ac, p_fe, p_fr, total, eta, marker)


WAVEFORM_CSV_HEADER = ["region_id", "t_s", "b_T"]


def read_waveforms(path):
    """Read region waveforms; each region must have uniform time steps.

    The period of each region is its sample count times its step.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader, [])]
    if header != WAVEFORM_CSV_HEADER:
        raise ValueError(f"{path}: expected header {','.join(WAVEFORM_CSV_HEADER)}")
    groups = {}
    for row in reader:
        groups.setdefault(row[0].strip(), []).append((float(row[1]), float(row[2])))
    out = []
    for rid, samples in groups.items():
        t = np.array([s[0] for s in samples])
        b = np.array([s[1] for s in samples])
        steps = np.diff(t)
        if len(t) < 2 or np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
            raise ValueError(f"{path}: region {rid} does not have uniform time steps")
        out.append(WaveformSample(rid, b, len(t) * steps.mean()))
    return out
