import numpy as np
import pytest

from ipmsm_char.drivecycle import (
    DriveCycle, VehicleParams, aggregate, evaluate_cycle, load_cycle, read_cycle,
    synthetic_urban_profile, wheel_demand, write_cycle_result)
from ipmsm_char.errors import NegativeSpeed, NonMonotonicTime
from ipmsm_char.losses import (CoreLossCoefficients, CoreRegion, FrictionCoefficients,
                               LossesConfig)
from ipmsm_char.solver import OperatingPointSolver

LOSSES = LossesConfig(CoreLossCoefficients(0.015, 4e-5, 5e-4, 50.0),
                      (CoreRegion("yoke", 6.0, 12.0),), FrictionCoefficients(0.05, 1e-3, 1e-6))
LOSSLESS = LossesConfig(CoreLossCoefficients(0.0, 0.0, 0.0, 50.0), mechanisms=frozenset())
CAR = VehicleParams(1800.0, 0.01, 0.6, 1.2, 0.33, 10.0, 1.0)


@pytest.fixture(scope="module")
def solver(lut, machine):
    return OperatingPointSolver(lut, machine)


@pytest.fixture(scope="module")
def urban(solver):
    return evaluate_cycle(synthetic_urban_profile(), CAR, solver, LOSSES)


class TestLoad:
    def test_two_points(self):
        c = load_cycle([(0, 0), (1, 1)])
        assert len(c) == 2

    def test_non_monotonic(self):
        with pytest.raises(NonMonotonicTime):
            load_cycle([(0, 0), (2, 1), (1, 1)])

    def test_negative_speed(self):
        with pytest.raises(NegativeSpeed):
            load_cycle([(0, 0), (1, -1)])

    def test_csv(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("# demo\nt_s,v_mps\n0,0\n1,2.5\n2,3\n")
        c = read_cycle(p)
        assert list(c.speed) == [0.0, 2.5, 3.0]

    def test_synthetic_profile(self):
        a = synthetic_urban_profile()
        b = synthetic_urban_profile()
        assert len(a) == 1800 and np.array_equal(a.speed, b.speed)
        assert a.speed.min() == 0.0 and a.speed[-1] == 0.0
        assert np.all(np.diff(a.time) == 1.0)


class TestWheelDemand:
    def test_standstill(self):
        c = DriveCycle(np.array([0.0, 1.0]), np.array([0.0, 0.0]))
        assert wheel_demand(c, CAR, 0) == (0.0, 0.0)

    def test_hand_arithmetic(self):
        c = DriveCycle(np.array([0.0, 1.0]), np.array([27.78, 27.78]))
        n, m = wheel_demand(c, CAR, 0)
        force = 1800 * 9.81 * 0.01 + 0.5 * 1.2 * 0.6 * 27.78 ** 2
        assert force == pytest.approx(454.4, abs=0.05)
        assert m == pytest.approx(15.0, abs=5e-3)
        assert n == pytest.approx(134.0, abs=0.05)

    def test_driveline_direction(self):
        vp = VehicleParams(1000.0, 0.0, 0.0, 1.2, 0.3, 5.0, 0.9)
        acc = DriveCycle(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        dec = DriveCycle(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
        assert wheel_demand(acc, vp, 0)[1] == pytest.approx(1000 * 0.3 / (5 * 0.9))
        assert wheel_demand(dec, vp, 0)[1] == pytest.approx(-1000 * 0.3 * 0.9 / 5)

    def test_index_check(self):
        c = DriveCycle(np.array([0.0, 1.0]), np.array([0.0, 0.0]))
        with pytest.raises(IndexError):
            wheel_demand(c, CAR, 1)

    def test_vehicle_validation(self):
        with pytest.raises(ValueError):
            VehicleParams(1000.0, 0.01, 0.6, 1.2, 0.3, 5.0, 1.2)


class TestEvaluate:
    def test_zero_speed(self, solver):
        c = load_cycle([(t, 0.0) for t in range(10)])
        res = evaluate_cycle(c, CAR, solver, LOSSES)
        assert res.energy_in == res.energy_out == res.loss_drive == 0.0
        assert res.infeasible_step_count == 0

    def test_constant_cruise(self, solver):
        c = load_cycle([(0.0, 15.0), (30.0, 15.0)])
        res = evaluate_cycle(c, CAR, solver, LOSSES)
        (r,) = res.records
        assert res.energy_in * 3600 == pytest.approx((r.p_mech + r.p_loss) * 30.0, rel=1e-12)
        assert r.p_loss > 0 and r.feasible

    def test_bookkeeping_closes(self, urban):
        assert urban.energy_in == pytest.approx(urban.energy_out + urban.loss_drive,
                                                rel=1e-9)
        assert urban.energy_recuperated == pytest.approx(
            urban.energy_braking - urban.loss_braking, rel=1e-9)

    def test_cycle_efficiency_is_weighted_mean(self, urban):
        drive = [r for r in urban.records if r.p_mech >= 0 and r.p_el > 0]
        num = sum(r.eta * r.p_el * r.dt for r in drive)
        den = sum(r.p_el * r.dt for r in drive)
        assert urban.cycle_efficiency == pytest.approx(num / den, rel=1e-9)

    def test_segment_independence(self, urban):
        k = len(urban.records) // 3
        a, b = aggregate(urban.records[:k]), aggregate(urban.records[k:])
        assert a.energy_in + b.energy_in == pytest.approx(urban.energy_in, rel=1e-12)
        assert a.energy_recuperated + b.energy_recuperated == pytest.approx(
            urban.energy_recuperated, rel=1e-12)

    def test_infeasible_clamped_and_flagged(self, solver):
        c = load_cycle([(0.0, 0.0), (1.0, 30.0)])
        res = evaluate_cycle(c, CAR, solver, LOSSES)
        (r,) = res.records
        assert not r.feasible and res.infeasible_step_count == 1
        assert r.torque < r.torque_demand
        assert r.torque == pytest.approx(solver.max_torque(r.n))

    def test_triangular_lossless_recuperates_all(self, solver):
        vp = VehicleParams(1500.0, 0.0, 0.0, 1.2, 0.3, 8.0, 1.0)
        v = list(np.linspace(0.0, 14.0, 15)) + list(np.linspace(14.0, 0.0, 15))[1:]
        c = load_cycle(list(zip(range(len(v)), v)))
        res = evaluate_cycle(c, vp, solver, LOSSLESS)
        assert res.infeasible_step_count == 0
        assert res.energy_recuperated == pytest.approx(res.energy_in, rel=1e-12)
        assert res.energy_in == pytest.approx(0.5 * 1500 * 14.0 ** 2 / 3600, rel=1e-12)


def test_result_csv(tmp_path, lut, machine):
    solver = OperatingPointSolver(lut, machine)
    res = evaluate_cycle(load_cycle([(0, 0), (1, 2), (2, 2), (3, 0)]), CAR, solver, LOSSES)
    path = tmp_path / "r.csv"
    write_cycle_result(path, res, ["config_hash=abc"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_hash=abc"
    assert lines[1].startswith("t_s,dt_s,n_per_min")
    assert sum(1 for ln in lines if not ln.startswith("#")) == 1 + 3
    assert any(ln.startswith("# cycle_efficiency=") for ln in lines)
