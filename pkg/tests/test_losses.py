import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ipmsm_char.errors import BadExponent, NonPhysical, TooFewSamples
from ipmsm_char.losses import (
    EXCESS_CONSTANT, CoreLossCoefficients, CoreRegion, EtaMarker, FrictionCoefficients,
    LossesConfig, WaveformSample, ac_resistance, bdot_alpha, conduction_loss, core_loss,
    dc_resistance, efficiency, friction_loss, loss_breakdown, read_waveforms,
    sinusoidal_waveform)
from ipmsm_char.machine import AcResistanceParams, DcResistanceParams

from conftest import make_machine

COPPER = DcResistanceParams(5.8e7, 3.9e-3, 293.15, 10.0, 2e-5)


class TestResistance:
    def test_reference_temperature(self):
        assert dc_resistance(COPPER, 293.15) == pytest.approx(10.0 / (5.8e7 * 2e-5), rel=1e-15)

    def test_copper_100K_rise(self):
        r = dc_resistance(COPPER, 393.15)
        assert r == pytest.approx(8.621e-3 * 1.39, rel=1e-4)
        assert r * 1e3 == pytest.approx(11.98, abs=5e-3)

    def test_alpha_zero(self):
        p = DcResistanceParams(5.8e7, 0.0, 293.15, 10.0, 2e-5)
        assert dc_resistance(p, 100.0) == dc_resistance(p, 500.0)

    def test_nonphysical(self):
        p = DcResistanceParams(5.8e7, 0.05, 293.15, 10.0, 2e-5)
        with pytest.raises(NonPhysical):
            dc_resistance(p, 200.0)

    def test_ac_examples(self):
        ac = AcResistanceParams(6.0, 1e-3, 1.5)
        assert ac_resistance(ac, 10.0, 0.01, 400.0) == pytest.approx(0.048, rel=1e-12)
        assert ac_resistance(AcResistanceParams(6.0, 1e-3, 1.0), 10.0, 0.01, 0.0) == 0.0
        assert ac_resistance(AcResistanceParams(6.0, 0.0, 1.5), 10.0, 0.01, 900.0) == 0.0

    def test_ac_bad_exponent(self):
        with pytest.raises(BadExponent):
            ac_resistance(AcResistanceParams(6.0, 1e-3, -0.5), 10.0, 0.01, 100.0)


class TestConduction:
    def test_zero(self):
        ac = AcResistanceParams(6.0, 1e-3, 1.5)
        assert conduction_loss(COPPER, ac, 0.0, 350.0, 200.0) == (0.0, 0.0)

    def test_rms_interpretation(self):
        # T chosen so R_dc = 10 mΩ; a = 0 removes the AC part
        dc = DcResistanceParams(1.0, 0.0, 293.15, 0.01, 1.0)
        ac = AcResistanceParams(1.0, 0.0, 1.0)
        p_dc, p_ac = conduction_loss(dc, ac, math.sqrt(2) * 100.0, 293.15, 50.0)
        assert p_dc == pytest.approx(300.0, rel=1e-12) and p_ac == 0.0

    @given(st.floats(0.1, 500.0), st.floats(0.1, 10.0), st.floats(0.0, 1000.0))
    def test_quadratic_scaling(self, amp, k, f):
        ac = AcResistanceParams(6.0, 1e-3, 1.5)
        a = conduction_loss(COPPER, ac, amp, 350.0, f)
        b = conduction_loss(COPPER, ac, k * amp, 350.0, f)
        assert b[0] == pytest.approx(k * k * a[0], rel=1e-12)
        assert b[1] == pytest.approx(k * k * a[1], rel=1e-12, abs=1e-300)


class TestBertotti:
    def test_constant_field(self):
        w = WaveformSample("r", np.full(64, 1.3), 0.02)
        assert bdot_alpha(w, 2.0) == pytest.approx(0.0, abs=1e-20)
        assert bdot_alpha(w, 2.0, "central") == 0.0

    def test_alpha2_sinusoid(self):
        f0, bm = 50.0, 1.4
        w = sinusoidal_waveform("r", bm, f0, 4096)
        exact = 0.5 * (2 * math.pi * f0 * bm) ** 2
        assert bdot_alpha(w, 2.0) == pytest.approx(exact, rel=1e-6)
        assert bdot_alpha(w, 2.0, "central") == pytest.approx(exact, rel=1e-6)

    def test_alpha15_against_quadrature(self):
        f0, bm = 50.0, 1.2
        s = np.linspace(0.0, 2 * math.pi, 1_000_001)[:-1]
        mean_cos = float(np.mean(np.abs(np.cos(s)) ** 1.5))
        exact = (2 * math.pi * f0 * bm) ** 1.5 * mean_cos
        w = sinusoidal_waveform("r", bm, f0, 4096)
        assert bdot_alpha(w, 1.5) == pytest.approx(exact, rel=1e-6)

    def test_central_converges_second_order(self):
        f0, bm = 50.0, 1.0
        exact = 0.5 * (2 * math.pi * f0 * bm) ** 2
        errs = [abs(bdot_alpha(sinusoidal_waveform("r", bm, f0, n), 2.0, "central") - exact)
                for n in (32, 64, 128)]
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            bdot_alpha(WaveformSample("r", np.ones(7), 0.02), 2.0)

    def test_bmax_validated(self):
        with pytest.raises(ValueError):
            WaveformSample("r", np.array([0.0, 1.0] * 8), 0.02, b_max=2.0)

    def test_classical_only_closed_form(self):
        f0, bm, kc = 50.0, 1.5, 3e-5
        w = sinusoidal_waveform("r", bm, f0, 4096)
        p = core_loss(CoreLossCoefficients(0.0, kc, 0.0, f0), w, f0)
        assert p == pytest.approx(kc * bm ** 2 * f0 ** 2, rel=1e-6)

    def test_zero_frequency(self):
        w = sinusoidal_waveform("r", 1.0, 50.0)
        assert core_loss(CoreLossCoefficients(1.0, 1.0, 1.0, 50.0), w, 0.0) == 0.0

    @pytest.mark.parametrize("coeffs,expected", [((1.0, 0, 0), 1.0), ((0, 1.0, 0), 2.0),
                                                 ((0, 0, 1.0), 1.5)])
    def test_frequency_exponents(self, coeffs, expected):
        w = sinusoidal_waveform("r", 1.3, 50.0, 1024)
        c = CoreLossCoefficients(*coeffs, 50.0)
        f = np.geomspace(10.0, 2000.0, 12)
        p = [core_loss(c, w, x) for x in f]
        slope = np.polyfit(np.log(f), np.log(p), 1)[0]
        assert slope == pytest.approx(expected, abs=1e-3)

    def test_excess_constant_value(self):
        # sinusoidal excess term collapses to k_e·(f·B)^1.5 by construction
        w = sinusoidal_waveform("r", 1.0, 50.0, 4096)
        p = core_loss(CoreLossCoefficients(0.0, 0.0, 1.0, 50.0), w, 50.0)
        assert p == pytest.approx(50.0 ** 1.5, rel=2e-3)
        assert EXCESS_CONSTANT == 8.76


class TestFriction:
    def test_examples(self):
        assert friction_loss(FrictionCoefficients(1.0, 0.0, 0.0), 0.0) == 0.0
        assert friction_loss(FrictionCoefficients(1.0, 0.0, 0.0), 100.0) == 100.0
        assert friction_loss(FrictionCoefficients(0.1, 1e-3, 1e-6), 200.0) == \
            pytest.approx(68.0, rel=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            FrictionCoefficients(-1.0)


class TestEfficiency:
    def test_examples(self):
        assert efficiency(10.0, 5.0, 0.0) == (1.0, EtaMarker.OK)
        n = 900.0 / (2 * math.pi * 10.0)
        assert efficiency(n, 10.0, 100.0)[0] == pytest.approx(0.9, rel=1e-12)
        n = 1000.0 / (2 * math.pi * 10.0)
        assert efficiency(n, -10.0, 100.0)[0] == pytest.approx(0.9, rel=1e-12)

    def test_generator_fully_dissipated(self):
        n = 100.0 / (2 * math.pi * 10.0)
        assert efficiency(n, -10.0, 150.0) == (0.0, EtaMarker.DEFINED_AS_ZERO)

    def test_zero_output(self):
        assert efficiency(10.0, 0.0, 5.0) == (0.0, EtaMarker.ZERO_OUTPUT)
        assert efficiency(0.0, 10.0, 5.0) == (0.0, EtaMarker.STALL)

    def test_mirrored_pair_formulas(self):
        n, m, pl = 50.0, 40.0, 300.0
        pm = 2 * math.pi * n * m
        assert efficiency(n, m, pl)[0] == pytest.approx(pm / (pm + pl), rel=1e-14)
        assert efficiency(n, -m, pl)[0] == pytest.approx((pm - pl) / pm, rel=1e-14)


def _losses(**kw):
    regions = (CoreRegion("yoke", 6.0, 12.0), CoreRegion("teeth", 4.0, 16.0))
    return LossesConfig(CoreLossCoefficients(0.015, 4e-5, 5e-4, 50.0), regions,
                        FrictionCoefficients(0.05, 1e-3, 1e-6), **kw)


class TestBreakdown:
    def test_components_sum(self):
        lb = loss_breakdown(_losses(), make_machine(), 200.0, 0.12, 80.0, 100.0, 353.15)
        assert lb.p_total == pytest.approx(lb.p_cu_dc + lb.p_cu_ac + lb.p_fe + lb.p_fr,
                                           rel=1e-12)
        assert min(lb.p_cu_dc, lb.p_cu_ac, lb.p_fe, lb.p_fr) > 0

    def test_core_loss_matches_region_sum(self):
        los = _losses()
        f = 400.0
        expect = 0.0
        for reg in los.regions:
            w = sinusoidal_waveform(reg.region_id, reg.b_per_flux * 0.11, 50.0)
            expect += reg.weight * core_loss(los.core, w, f)
        assert los.core_loss_at(0.11, f) == pytest.approx(expect, rel=1e-12)

    def test_mechanisms_off(self):
        lb = loss_breakdown(_losses(mechanisms=frozenset()), make_machine(),
                            200.0, 0.12, 80.0, 100.0, 353.15)
        assert lb.p_total == 0.0 and lb.eta == 1.0

    def test_custom_shape_region(self):
        shape = WaveformSample("r", np.sign(np.sin(np.linspace(0, 2 * np.pi, 64,
                                                               endpoint=False)) + 1e-9),
                               0.02)
        los = LossesConfig(CoreLossCoefficients(0.0, 1e-4, 0.0, 50.0),
                           (CoreRegion("r", 1.0, 10.0, shape),))
        assert los.core_loss_at(0.1, 100.0) > 0

    @settings(max_examples=10_000, deadline=None)
    @given(st.floats(0.0, 350.0), st.floats(0.0, 0.3), st.floats(0.0, 250.0),
           st.floats(-300.0, 300.0), st.floats(233.15, 453.15))
    def test_random_points_physical(self, amp, psi, n, m, temp):
        lb = loss_breakdown(_losses(), make_machine(), amp, psi, n, m, temp)
        assert min(lb.p_cu_dc, lb.p_cu_ac, lb.p_fe, lb.p_fr) >= 0
        assert 0.0 <= lb.eta <= 1.0


def test_read_waveforms(tmp_path):
    path = tmp_path / "w.csv"
    lines = ["region_id,t_s,b_T"]
    for k in range(16):
        lines.append(f"a,{k * 0.001},{math.sin(2 * math.pi * k / 16)}")
    path.write_text("\n".join(lines) + "\n")
    (w,) = read_waveforms(path)
    assert w.region_id == "a" and len(w.b_samples) == 16
    assert w.period == pytest.approx(0.016)
