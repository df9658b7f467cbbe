import math

import pytest

from ipmsm_char.fluxmap import SyntheticModelParams, synthetic_flux_map
from ipmsm_char.machine import AcResistanceParams, DcResistanceParams, MachineParams

P = 4
PSI_PM = 0.1
L_D = 0.2e-3
L_Q = 0.5e-3
I_MAX = 350.0

_ACCEPTANCE_LINES = []


def record_acceptance(line):
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_machine(u_dc=400.0, l_sigma=0.0, i_max=I_MAX, p=P, coeff_a=1e-3):
    return MachineParams(
        pole_pairs=p, psi_pm=PSI_PM, l_d=L_D, l_q=L_Q, l_sigma_ew=l_sigma,
        r_dc_params=DcResistanceParams(5.8e7, 3.9e-3, 293.15, 10.0, 2e-5),
        r_ac_params=AcResistanceParams(6.0, coeff_a, 1.5),
        i_max=i_max, u_dc=u_dc)


def salient_params(**kw):
    base = dict(psi_pm=PSI_PM, l_d0=L_D, l_q0=L_Q, i_sat_d=math.inf, i_sat_q=math.inf)
    base.update(kw)
    return SyntheticModelParams(**base)


def salient_map(n=41, i_max=400.0, params=None):
    from ipmsm_char.fluxmap import complete_by_symmetry
    half = synthetic_flux_map(params or salient_params(), (-i_max, 0.0), (0.0, i_max), n)
    return complete_by_symmetry(half)


@pytest.fixture(scope="session")
def machine():
    return make_machine()


@pytest.fixture(scope="session")
def lut():
    return salient_map()
