import math

import numpy as np
import pytest

from pmpkit import catalog
from pmpkit.numerics import IntegratorConfig, ShootingConfig, shoot

SMOOTH = ("lqr-scalar", "harmonic-action")

# closed-form reference constants, computed here independently of the catalog
COTH1 = math.cosh(1.0) / math.sinh(1.0)
LQR_HBAR = 1.0 / (2.0 * math.sinh(1.0) ** 2)
LQR_COST = COTH1 / 2.0


def bang_configs():
    c = catalog.get("bang-integrator").solver
    icfg = IntegratorConfig(method=c["method"], h=c["h"], atol=c["atol"], rtol=c["rtol"])
    return ShootingConfig(fd_scale=c["fd_scale"], tol=c["tol"]), icfg


@pytest.fixture(scope="session")
def solved():
    """Shooting solutions of every catalog entry, keyed by name."""
    out = {}
    for name in catalog.names():
        ent = catalog.get(name)
        if name == "bang-integrator":
            scfg, icfg = bang_configs()
            out[name] = shoot(ent.problem, -1.0, ent.default_guess, scfg, icfg)
        else:
            out[name] = shoot(ent.problem, -1.0, ent.default_guess)
    return out


@pytest.fixture(scope="session")
def analytic():
    return {name: catalog.get(name).analytic_extremal() for name in catalog.names()}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
