import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ipmsm_char.errors import InfeasibleAtSpeed, OutOfRange, TorqueUnreachable
from ipmsm_char.fluxmap import FluxMap, synthetic_flux_map
from ipmsm_char.machine import DqValue, dq_from_polar
from ipmsm_char.solver import (
    LimitBinding, OperatingPointSolver, SolverSettings, capability_envelope,
    field_weakening_setpoint, mtpa_setpoint, stator_resistance, stator_voltage, torque,
    voltage_limit)

from conftest import L_D, L_Q, PSI_PM, make_machine, salient_map, salient_params

N_REF = 6500.0 / 60.0


def mtpa_closed_form(amp):
    """Optimal current pair at a given amplitude for the linear salient machine."""
    dl = L_Q - L_D
    i_d = (PSI_PM - math.sqrt(PSI_PM ** 2 + 8 * dl ** 2 * amp ** 2)) / (4 * dl)
    return i_d, math.sqrt(amp ** 2 - i_d ** 2)


def closed_torque(i_d, i_q, p=4):
    return 1.5 * p * (PSI_PM * i_q + (L_D - L_Q) * i_d * i_q)


@pytest.fixture(scope="module")
def solver(lut, machine):
    return OperatingPointSolver(lut, machine)


class TestEquations:
    def test_zero_current_torque(self, lut):
        assert torque(lut, DqValue(0.0, 0.0), 4) == 0.0

    def test_non_salient_torque(self):
        m = synthetic_flux_map(salient_params(l_q0=L_D), (-200, 0), (0, 200), 5)
        assert torque(m, DqValue(0.0, 100.0), 4) == pytest.approx(60.0, rel=1e-12)

    def test_voltage_at_standstill(self, lut, machine):
        u, _ = stator_voltage(lut, machine, DqValue(-50.0, 80.0), 0.0, 0.01)
        assert (u.d, u.q) == pytest.approx((-0.5, 0.8), rel=1e-12)

    def test_open_circuit_voltage(self, lut, machine):
        u, amp = stator_voltage(lut, machine, DqValue(0.0, 0.0), N_REF, 0.01)
        w = 2 * math.pi * N_REF * 4
        assert u.d == 0.0 and u.q == pytest.approx(w * PSI_PM, rel=1e-12)

    def test_voltage_example(self, lut, machine):
        u, amp = stator_voltage(lut, machine, DqValue(0.0, 100.0), N_REF, 0.01)
        assert 2 * math.pi * N_REF * 4 == pytest.approx(2722.7, abs=0.05)
        assert u.d == pytest.approx(-136.1, abs=0.05)
        assert u.q == pytest.approx(273.3, abs=0.05)
        assert amp == pytest.approx(math.hypot(u.d, u.q), rel=1e-12)

    def test_voltage_limit(self):
        assert voltage_limit(800.0) == pytest.approx(509.30, abs=5e-3)
        assert voltage_limit(0.5 * math.pi) == pytest.approx(1.0)
        assert voltage_limit(math.pi) == pytest.approx(2.0)

    def test_end_winding_leakage_adds_to_flux(self, lut):
        mp = make_machine(l_sigma=1e-4)
        u0, _ = stator_voltage(lut, make_machine(), DqValue(-30.0, 40.0), 50.0, 0.0)
        u1, _ = stator_voltage(lut, mp, DqValue(-30.0, 40.0), 50.0, 0.0)
        w = 2 * math.pi * 50.0 * 4
        assert u1.d - u0.d == pytest.approx(-w * 1e-4 * 40.0, rel=1e-9)
        assert u1.q - u0.q == pytest.approx(w * 1e-4 * -30.0, rel=1e-9)

    def test_resistance_models(self, machine):
        dc = stator_resistance(machine, 100.0, SolverSettings(voltage_model_resistance="dc"))
        both = stator_resistance(machine, 100.0, SolverSettings())
        assert both > dc
        assert stator_resistance(machine, 0.0, SolverSettings()) == pytest.approx(dc)


class TestMtpa:
    def test_zero_target(self, solver):
        assert solver.mtpa(0.0).amplitude == 0.0

    @pytest.mark.parametrize("target", [10.0, 60.0, 150.0, 250.0])
    def test_matches_closed_form(self, solver, target):
        c = solver.mtpa(target)
        i_d, i_q = mtpa_closed_form(c.amplitude)
        assert closed_torque(i_d, i_q) == pytest.approx(target, rel=1e-6)
        assert c.beta == pytest.approx(math.atan2(i_q, i_d), abs=1e-5)
        got = torque(solver.fmap, dq_from_polar(c), 4)
        assert abs(got - target) <= 1e-4 * max(1.0, target)

    def test_angle_range(self, solver):
        for t in (1.0, 100.0, 270.0):
            assert math.pi / 2 <= solver.mtpa(t).beta <= math.pi

    def test_negative_target_mirrors(self, solver):
        pos, neg = solver.mtpa(60.0), solver.mtpa(-60.0)
        assert neg.amplitude == pos.amplitude
        assert neg.beta == pytest.approx(2 * math.pi - pos.beta)

    def test_unreachable(self, solver):
        with pytest.raises(TorqueUnreachable):
            solver.mtpa(solver.torque_capability * 1.01)

    def test_non_salient_boundary(self, machine):
        m = salient_map(n=21, params=salient_params(l_q0=L_D))
        c = mtpa_setpoint(m, machine, 60.0)
        assert c.beta == pytest.approx(math.pi / 2, abs=1e-6)
        assert c.amplitude == pytest.approx(100.0, rel=1e-5)

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.3, 3.0))
    def test_scaling_keeps_angle(self, k):
        base = salient_map(n=21)
        scaled = FluxMap(base.id_grid, base.iq_grid, k * base.psi_d, k * base.psi_q)
        mp = make_machine()
        s0, s1 = OperatingPointSolver(base, mp), OperatingPointSolver(scaled, mp)
        assert s1.beta_capability == pytest.approx(s0.beta_capability, abs=1e-6)
        assert s1.torque_capability == pytest.approx(k * s0.torque_capability, rel=1e-9)

    def test_domain_check(self, machine):
        small = synthetic_flux_map(salient_params(), (-100, 0), (0, 100), 5)
        with pytest.raises(OutOfRange):
            OperatingPointSolver(small, machine)


class TestFieldWeakening:
    def test_standstill_is_mtpa(self, solver):
        assert solver.field_weakening(60.0, 0.0) == solver.mtpa(60.0)

    def test_limits_and_torque(self, solver):
        c = solver.field_weakening(60.0, N_REF)
        op = solver.operating_point(c, N_REF)
        assert c.amplitude <= solver.mp.i_max
        assert op.voltage_amplitude <= solver.u_lim + 1e-6
        assert op.torque == pytest.approx(60.0, rel=1e-4)
        assert c.beta > solver.mtpa(60.0).beta
        assert op.limit_binding in (LimitBinding.VOLTAGE, LimitBinding.BOTH)

    def test_zero_torque_weakening(self, solver):
        n = 200.0
        assert 2 * math.pi * n * 4 * PSI_PM > solver.u_lim
        c = solver.field_weakening(0.0, n)
        i = dq_from_polar(c)
        assert i.d < 0 and c.amplitude > 0
        assert solver.operating_point(c, n).voltage_amplitude <= solver.u_lim + 1e-6

    def test_infeasible_carries_max_torque(self, solver):
        with pytest.raises(InfeasibleAtSpeed) as exc:
            solver.field_weakening(250.0, 150.0)
        assert 0 < exc.value.max_feasible_torque < 250.0

    def test_unreachable(self, solver):
        with pytest.raises(TorqueUnreachable):
            solver.field_weakening(1e4, 10.0)

    def test_module_wrapper(self, lut, machine, solver):
        assert field_weakening_setpoint(lut, machine, 60.0, N_REF) == \
            solver.field_weakening(60.0, N_REF)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.0, 1.0), st.floats(0.0, 300.0))
    def test_every_setpoint_within_limits(self, solver, frac, n):
        m = frac * solver.torque_capability
        c = solver.try_field_weakening(m, n)
        if c is None:
            return
        op = solver.operating_point(c, n)
        assert c.amplitude <= solver.mp.i_max * (1 + 1e-12)
        assert op.voltage_amplitude <= solver.u_lim + solver.settings.voltage_tolerance
        assert abs(op.torque - m) <= 1e-4 * max(1.0, m) + 1e-9

    def test_voltage_bound_factor_configurable(self, lut, machine):
        tight = OperatingPointSolver(lut, machine, SolverSettings(voltage_limit_factor=0.5))
        assert tight.u_lim == pytest.approx(200.0)


class TestEnvelope:
    def test_standstill_equals_beta_scan(self, solver):
        beta = np.linspace(math.pi / 2, math.pi, 200_001)
        i_d, i_q = 350.0 * np.cos(beta), 350.0 * np.sin(beta)
        brute = float(np.max(closed_torque(i_d, i_q)))
        env = solver.envelope([0.0])[0]
        assert env.feasible
        assert env.torque_max == pytest.approx(brute, rel=1e-6)

    def test_non_increasing_in_speed(self, lut, machine):
        speeds = np.linspace(0.0, 300.0, 13)
        env = capability_envelope(lut, machine, speeds)
        t = [e.torque_max for e in env]
        tol = 1e-4 * t[0]
        assert all(b <= a + tol for a, b in zip(t, t[1:]))

    def test_floor_when_nothing_feasible(self, solver):
        e = solver.envelope([500.0])[0]
        assert not e.feasible and e.torque_max == 0.0

    def test_speeds_must_ascend(self, lut, machine):
        with pytest.raises(ValueError):
            capability_envelope(lut, machine, [10.0, 5.0])


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(beta_grid_points=4)
    with pytest.raises(ValueError):
        SolverSettings(voltage_model_resistance="ac")
