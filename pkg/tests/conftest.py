import numpy as np
import pytest
from scipy.integrate import solve_ivp

from lhsis import dynamics as dyn
from lhsis.transform import Chart


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def scipy_oracle(spec: dyn.SystemSpec, y0, t0: float, t1: float, ts, rtol=1e-12, atol=1e-12):
    """Reference trajectory from scipy's DOP853, independent of the package integrator."""

    def f(t, y):
        du, dv = dyn.rhs_arrays(spec, t, y[0::2], y[1::2])
        out = np.empty_like(y)
        out[0::2], out[1::2] = du, dv
        return out

    sol = solve_ivp(f, (t0, t1), np.ravel(y0), method="DOP853", t_eval=ts, rtol=rtol, atol=atol)
    assert sol.success, sol.message
    return sol.y.T


BOOK = dict(rho0="1 + 0.5*sin(t)", b2="cos(t)")
OSCILLATOR = dict(rho0="1 + 0.5*sin(t)", b1="0.3*exp(-t)", b2=1.0)
TWO_PHOTON = dict(rho0="1 + 0.5*sin(t)", b1="0.3*exp(-t)", b2="cos(t)", b4="0.5 + 0.1*cos(t)", b5=-0.4)


def cartesian(algebra, **coeffs):
    return dyn.SystemSpec(algebra, Chart.CARTESIAN, **coeffs)


# acceptance results, filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split(".")[0])):
        ok, line = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {line}")
