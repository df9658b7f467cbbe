"""Torque, stator voltage and current set-points under current and voltage limits.

Set-points are searched on the continuous LUT interpolant with
derivative-free methods:

* MTPA: bisection on the current amplitude, where each trial amplitude is
  scored by its maximum torque over the current angle (grid scan plus
  golden-section refinement).
* Field weakening: when the MTPA point violates the voltage limit, walk the
  constant-torque curve from the MTPA angle towards β = π and bisect on the
  voltage constraint.

Current angles are searched on [π/2, π] (Id <= 0, Iq >= 0).  Negative torque
is served by mirroring Iq, never by searching β > π.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import InfeasibleAtSpeed, OutOfRange, TorqueUnreachable
from .fluxmap import BOUND_SNAP, FluxMap
from .losses import ac_resistance, dc_resistance
from .machine import (TWO_PI, CurrentPolar, DqValue, MachineParams,
                      electrical_frequency)

HALF_PI = 0.5 * math.pi
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
# bracket widths at which the searches stop (rad / relative amplitude)
ANGLE_XTOL = 1e-10
AMPLITUDE_RTOL = 1e-12


class LimitBinding(enum.Enum):
    NONE = "None"
    CURRENT = "Current"
    VOLTAGE = "Voltage"
    BOTH = "Both"


@dataclass(frozen=True)
class SolverSettings:
    """
    Parameters
    ----------
    beta_grid_points : int
        Samples of the current-angle scan before refinement.
    refine_tolerance : float
        Relative torque tolerance of set-points and of the envelope.
    voltage_tolerance : float
        Admissible voltage overshoot (V).
    max_iterations : int
        Cap for every bisection / golden-section loop.
    winding_temperature : float or None
        Temperature (K) for the resistance in the voltage model; ``None``
        uses the conductor reference temperature.
    voltage_model_resistance : {"dc", "dc_plus_ac"}
    voltage_limit_factor : float
        Phase-voltage amplitude limit as a fraction of U_dc.
    """
    beta_grid_points: int = 16
    refine_tolerance: float = 1e-4
    voltage_tolerance: float = 1e-6
    max_iterations: int = 200
    winding_temperature: float = None
    voltage_model_resistance: str = "dc_plus_ac"
    voltage_limit_factor: float = 2.0 / math.pi

    def __post_init__(self):
        if self.beta_grid_points < 8:
            raise ValueError("beta_grid_points must be >= 8")
        if not (self.refine_tolerance > 0 and self.voltage_tolerance > 0):
            raise ValueError("tolerances must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.voltage_model_resistance not in ("dc", "dc_plus_ac"):
            raise ValueError("voltage_model_resistance must be 'dc' or 'dc_plus_ac'")
        if not self.voltage_limit_factor > 0:
            raise ValueError("voltage_limit_factor must be > 0")


@dataclass(frozen=True)
class OperatingPoint:
    current: DqValue
    speed_n: float
    torque: float
    voltage: DqValue
    voltage_amplitude: float
    feasible: bool
    limit_binding: LimitBinding


def torque(fmap: FluxMap, i: DqValue, p: int) -> float:
    """Electromagnetic torque (Nm) from the interpolated flux linkages."""
    psd, psq = fmap.psi_at(i.d, i.q)
    return 1.5 * p * (psd * i.q - psq * i.d)


def stator_voltage(fmap: FluxMap, mp: MachineParams, i: DqValue, n: float, r_s: float):
    """Steady-state dq voltage (V) and its amplitude at speed ``n`` (1/s)."""
    psd, psq = fmap.psi_at(i.d, i.q)
    w = electrical_frequency(n, mp.pole_pairs)
    ud = r_s * i.d - w * (psq + mp.l_sigma_ew * i.q)
    uq = r_s * i.q + w * (psd + mp.l_sigma_ew * i.d)
    return DqValue(ud, uq), math.hypot(ud, uq)


def voltage_limit(u_dc: float, factor: float = 2.0 / math.pi) -> float:
    if not u_dc > 0:
        raise ValueError("u_dc must be > 0")
    return factor * u_dc


def stator_resistance(mp: MachineParams, n: float, settings: SolverSettings) -> float:
    """Phase resistance used by the voltage equations at speed ``n``."""
    temp = settings.winding_temperature
    if temp is None:
        temp = mp.r_dc_params.t_ref
    r = dc_resistance(mp.r_dc_params, temp)
    if settings.voltage_model_resistance == "dc_plus_ac":
        r += ac_resistance(mp.r_ac_params, mp.r_dc_params.conductor_length, r,
                           n * mp.pole_pairs)
    return r


def mirror(c: CurrentPolar) -> CurrentPolar:
    """Reflect a set-point about the d-axis (Iq -> -Iq)."""
    return CurrentPolar(c.amplitude, TWO_PI - c.beta)


class OperatingPointSolver:
    """Set-point searches on one LUT / machine / settings combination.

    Instances cache speed-independent results (MTPA per torque, the torque
    capability at the current limit), so reuse one across many queries.
    """

    def __init__(self, fmap: FluxMap, mp: MachineParams, settings: SolverSettings = None):
        self.fmap = fmap
        self.mp = mp
        self.settings = settings or SolverSettings()
        self.u_lim = voltage_limit(mp.u_dc, self.settings.voltage_limit_factor)
        self._k = 1.5 * mp.pole_pairs
        self._psi = fmap.psi_at
        self._mtpa_cache = {}
        self._check_domain()
        self.torque_capability, self.beta_capability = self._max_torque_at(mp.i_max)

    # -- evaluation -----------------------------------------------------

    def _check_domain(self):
        f, imax = self.fmap, self.mp.i_max
        span_d = f.id_grid[-1] - f.id_grid[0]
        span_q = f.iq_grid[-1] - f.iq_grid[0]
        if f.id_grid[0] > -imax + BOUND_SNAP * span_d:
            raise OutOfRange("id", -imax, float(f.id_grid[0]))
        if f.id_grid[-1] < -BOUND_SNAP * span_d:
            raise OutOfRange("id", 0.0, float(f.id_grid[-1]))
        if f.iq_grid[-1] < imax - BOUND_SNAP * span_q:
            raise OutOfRange("iq", imax, float(f.iq_grid[-1]))
        if f.iq_grid[0] > BOUND_SNAP * span_q:
            raise OutOfRange("iq", 0.0, float(f.iq_grid[0]))

    def _torque(self, amp, beta):
        d = amp * math.cos(beta)
        q = amp * math.sin(beta)
        psd, psq = self._psi(d, q)
        return self._k * (psd * q - psq * d)

    def _voltage(self, amp, beta, w, r_s):
        d = amp * math.cos(beta)
        q = amp * math.sin(beta)
        psd, psq = self._psi(d, q)
        ls = self.mp.l_sigma_ew
        ud = r_s * d - w * (psq + ls * q)
        uq = r_s * q + w * (psd + ls * d)
        return math.hypot(ud, uq)

    def _speed_terms(self, n):
        return electrical_frequency(n, self.mp.pole_pairs), stator_resistance(
            self.mp, n, self.settings)

    def operating_point(self, current: CurrentPolar, n: float) -> OperatingPoint:
        s = self.settings
        i = DqValue(current.amplitude * math.cos(current.beta) + 0.0,
                    current.amplitude * math.sin(current.beta) + 0.0)
        r_s = stator_resistance(self.mp, n, s)
        u, u_amp = stator_voltage(self.fmap, self.mp, i, n, r_s)
        m = torque(self.fmap, i, self.mp.pole_pairs)
        imax = self.mp.i_max
        ok_i = current.amplitude <= imax * (1 + 1e-12)
        ok_u = u_amp <= self.u_lim + s.voltage_tolerance
        at_i = current.amplitude >= imax * (1 - 1e-6)
        at_u = u_amp >= self.u_lim * (1 - 1e-6)
        binding = {(False, False): LimitBinding.NONE, (True, False): LimitBinding.CURRENT,
                   (False, True): LimitBinding.VOLTAGE, (True, True): LimitBinding.BOTH}
        return OperatingPoint(i, n, m, u, u_amp, ok_i and ok_u, binding[(at_i, at_u)])

    # -- MTPA -------------------------------------------------------------

    def _golden_max(self, fn, a, b):
        """Golden-section maximum of ``fn`` on [a, b]; returns (x, f(x))."""
        c = b - INV_PHI * (b - a)
        d = a + INV_PHI * (b - a)
        fc, fd = fn(c), fn(d)
        for _ in range(self.settings.max_iterations):
            if b - a <= ANGLE_XTOL:
                break
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - INV_PHI * (b - a)
                fc = fn(c)
            else:
                a, c, fc = c, d, fd
                d = a + INV_PHI * (b - a)
                fd = fn(d)
        return (c, fc) if fc >= fd else (d, fd)

    def _beta_grid(self, lo=HALF_PI, hi=math.pi):
        n = self.settings.beta_grid_points
        step = (hi - lo) / (n - 1)
        return [lo + k * step for k in range(n - 1)] + [hi]

    def _max_torque_at(self, amp):
        """Maximum torque over β ∈ [π/2, π] at amplitude ``amp``; ties -> smallest β."""
        if amp == 0:
            return 0.0, HALF_PI
        betas = self._beta_grid()
        vals = [self._torque(amp, b) for b in betas]
        k = max(range(len(vals)), key=lambda j: (vals[j], -j))
        lo = betas[max(k - 1, 0)]
        hi = betas[min(k + 1, len(betas) - 1)]
        x, fx = self._golden_max(lambda b: self._torque(amp, b), lo, hi)
        if fx > vals[k]:
            return fx, x
        return vals[k], betas[k]

    def _torque_tol(self, target):
        return self.settings.refine_tolerance * max(1.0, abs(target))

    def mtpa(self, torque_target: float) -> CurrentPolar:
        """Minimum-amplitude current for ``torque_target`` (any sign)."""
        if torque_target < 0:
            return mirror(self.mtpa(-torque_target))
        cached = self._mtpa_cache.get(torque_target)
        if cached is not None:
            return cached
        result = self._mtpa_positive(torque_target)
        self._mtpa_cache[torque_target] = result
        return result

    def _mtpa_positive(self, target):
        if target == 0:
            return CurrentPolar(0.0, HALF_PI)
        if target > self.torque_capability:
            raise TorqueUnreachable(target, self.torque_capability)
        lo, hi = 0.0, self.mp.i_max
        t_hi, b_hi = self.torque_capability, self.beta_capability
        tol = 1e-3 * self._torque_tol(target)
        for _ in range(self.settings.max_iterations):
            if t_hi - target <= tol or hi - lo <= AMPLITUDE_RTOL * self.mp.i_max:
                break
            mid = 0.5 * (lo + hi)
            t_mid, b_mid = self._max_torque_at(mid)
            if t_mid >= target:
                hi, t_hi, b_hi = mid, t_mid, b_mid
            else:
                lo = mid
        return CurrentPolar(hi, b_hi)

    # -- field weakening -------------------------------------------------

    def _amplitude_for_torque(self, beta, target):
        """Smallest amplitude reaching ``target`` at angle ``beta`` (None if > i_max)."""
        imax = self.mp.i_max
        if self._torque(imax, beta) < target:
            return None
        lo, hi = 0.0, imax
        for _ in range(self.settings.max_iterations):
            if hi - lo <= AMPLITUDE_RTOL * imax:
                break
            mid = 0.5 * (lo + hi)
            if self._torque(mid, beta) >= target:
                hi = mid
            else:
                lo = mid
        return hi

    def _weakening_search(self, target, n, beta_start):
        """Field-weakening set-point for ``target`` >= 0, or None if infeasible."""
        s = self.settings
        w, r_s = self._speed_terms(n)
        # bisection aims at the limit itself; the tolerance only decides feasibility
        u_lim, tol = self.u_lim, s.voltage_tolerance
        imax = self.mp.i_max

        if target == 0:
            # the zero-torque curve is the negative d-axis
            def excess(amp):
                return self._voltage(amp, math.pi, w, r_s) - u_lim

            def point(x):
                return x
            lo, hi = 0.0, imax
        else:
            if self._torque(imax, beta_start) < target:
                return None
            # end of the constant-torque curve, where it meets the current limit
            a, b = max(beta_start, self.beta_capability), math.pi
            for _ in range(s.max_iterations):
                if b - a <= ANGLE_XTOL:
                    break
                mid = 0.5 * (a + b)
                if self._torque(imax, mid) >= target:
                    a = mid
                else:
                    b = mid
            amps = {}

            def point(beta):
                if beta not in amps:
                    amps[beta] = self._amplitude_for_torque(beta, target)
                return amps[beta]

            def excess(beta):
                amp = point(beta)
                if amp is None:
                    return math.inf
                return self._voltage(amp, beta, w, r_s) - u_lim
            lo, hi = beta_start, a

        xs = self._beta_grid(lo, hi)
        gs = [excess(x) for x in xs]
        first = next((k for k, g in enumerate(gs) if g <= tol), None)
        if first is None:
            j = min(range(len(gs)), key=lambda k: gs[k])
            a = xs[max(j - 1, 0)]
            b = xs[min(j + 1, len(xs) - 1)]
            x_min, neg_g = self._golden_max(lambda x: -excess(x), a, b)
            if -neg_g > tol:
                return None
            left, right = a, x_min
        elif first == 0:
            left = right = xs[0]
        else:
            left, right = xs[first - 1], xs[first]
        # left infeasible, right feasible
        for _ in range(s.max_iterations):
            if right - left <= ANGLE_XTOL * max(1.0, abs(right)):
                break
            mid = 0.5 * (left + right)
            if excess(mid) <= 0:
                right = mid
            else:
                left = mid
        if target == 0:
            return CurrentPolar(right, math.pi)
        return CurrentPolar(point(right), right)

    def field_weakening(self, torque_target: float, n: float) -> CurrentPolar:
        """MTPA set-point if voltage-feasible at ``n``, else the weakened one."""
        if abs(torque_target) > self.torque_capability:
            raise TorqueUnreachable(abs(torque_target), self.torque_capability)
        c = self.try_field_weakening(torque_target, n)
        if c is None:
            raise InfeasibleAtSpeed(torque_target, n, self.max_torque(n))
        return c

    def try_field_weakening(self, torque_target, n):
        """Like :meth:`field_weakening` but returns None when infeasible."""
        if torque_target < 0:
            c = self.try_field_weakening(-torque_target, n)
            return None if c is None else mirror(c)
        if torque_target > self.torque_capability:
            return None
        c = self.mtpa(torque_target)
        w, r_s = self._speed_terms(n)
        if self._voltage(c.amplitude, c.beta, w, r_s) <= self.u_lim + self.settings.voltage_tolerance:
            return c
        return self._weakening_search(torque_target, n, c.beta)

    # -- capability -------------------------------------------------------

    def max_torque(self, n: float) -> float:
        """Largest feasible torque at speed ``n``; ``-inf`` if nothing is."""
        cap = self.torque_capability
        if self.try_field_weakening(cap, n) is not None:
            return cap
        if self.try_field_weakening(0.0, n) is None:
            return -math.inf
        lo, hi = 0.0, cap
        tol = self._torque_tol(cap)
        for _ in range(self.settings.max_iterations):
            if hi - lo <= tol:
                break
            mid = 0.5 * (lo + hi)
            if self.try_field_weakening(mid, n) is not None:
                lo = mid
            else:
                hi = mid
        return lo

    def envelope(self, speeds):
        out = []
        for n in speeds:
            m = self.max_torque(n)
            out.append(EnvelopePoint(n, max(m, 0.0), m >= 0))
        return out


@dataclass(frozen=True)
class EnvelopePoint:
    speed_n: float
    torque_max: float
    feasible: bool


def mtpa_setpoint(fmap, mp, torque_target, settings=None) -> CurrentPolar:
    return OperatingPointSolver(fmap, mp, settings).mtpa(torque_target)


def field_weakening_setpoint(fmap, mp, torque_target, n, settings=None) -> CurrentPolar:
    return OperatingPointSolver(fmap, mp, settings).field_weakening(torque_target, n)


def capability_envelope(fmap, mp, speeds, settings=None):
    """Maximum torque per speed under both limits.

    Entries where even zero torque violates the voltage limit report
    ``torque_max = 0`` with ``feasible = False``.
    """
    speeds = list(speeds)
    if any(b < a for a, b in zip(speeds, speeds[1:])):
        raise ValueError("speeds must be ascending")
    return OperatingPointSolver(fmap, mp, settings).envelope(speeds)
