import math

import numpy as np
import pytest

from pmpkit import catalog
from pmpkit.errors import GridMismatch
from pmpkit.model import Box, ControlProblem, Extremal, FiniteSet
from pmpkit.numerics import propagate, shoot
from pmpkit.verify import (
    THEOREM,
    control_jumps,
    derivative,
    fd_weights,
    hamiltonian_constancy,
    maximality_gap,
    residual_adjoint,
    residual_control,
    verify_extremal,
)

from conftest import LQR_HBAR

LQR = catalog.get("lqr-scalar")
BANG = catalog.get("bang-integrator")
HARM = catalog.get("harmonic-action")
REST = catalog.get("rest")


def _with(e, **kw):
    d = dict(grid=e.grid, x=e.x, u=e.u, psi0=e.psi0, psi=e.psi)
    d.update(kw)
    return Extremal(**d)


def test_fd_weights_known_stencils():
    assert np.allclose(fd_weights(0.0, np.array([-1.0, 0.0, 1.0])), [-0.5, 0.0, 0.5])
    assert np.allclose(fd_weights(0.0, np.arange(-2.0, 3.0)), np.array([1, -8, 0, 8, -1]) / 12)
    assert np.allclose(fd_weights(0.0, np.array([0.0, 1.0])), [-1.0, 1.0])


def test_derivative_exact_on_quartics():
    g = np.sort(np.random.default_rng(3).uniform(0, 1, 30))
    f = g ** 4 - 2 * g ** 3 + g
    assert np.allclose(derivative(g, f[:, None])[:, 0], 4 * g ** 3 - 6 * g ** 2 + 1, atol=1e-9)


def test_derivative_never_crosses_jump():
    g = np.linspace(0, 1, 21)
    f = np.where(g <= 0.5, g, 10 + g)[:, None]
    d = derivative(g, f, [10])
    assert np.allclose(d, 1.0)


def test_rest_residuals_zero(analytic):
    e = analytic["rest"]
    assert residual_control(REST.problem, e).max == 0.0
    assert residual_adjoint(REST.problem, e).max == 0.0


def test_lqr_control_residual_small():
    e = LQR.analytic_extremal(1001)
    assert residual_control(LQR.problem, e).max <= 1e-5


def test_corrupted_node_amplified():
    e = LQR.analytic_extremal(1001)
    x = e.x.copy()
    x[500, 0] += 1e-2
    assert residual_control(LQR.problem, _with(e, x=x)).max >= 1.0


def test_harmonic_adjoint_small_and_sign_flip():
    e = HARM.analytic_extremal(1001)
    assert residual_adjoint(HARM.problem, e).max <= 1e-5
    flipped = residual_adjoint(HARM.problem, _with(e, psi=-e.psi)).max
    assert flipped == pytest.approx(2 * np.max(np.abs(e.x)), rel=1e-6)


def test_maximality_bang(analytic):
    e = analytic["bang-integrator"]
    assert maximality_gap(BANG.problem, e, 101).max <= 1e-12
    wrong = maximality_gap(BANG.problem, _with(e, u=np.ones_like(e.u)), 101)
    assert wrong.max == pytest.approx(1.0, abs=1e-12) and wrong.location == 0.0


def test_maximality_singleton_region():
    e = LQR.analytic_extremal(101)
    p = ControlProblem.from_text("(x1^2 + u1^2)/2", ["u1"], 1, FiniteSet([(0.3,)]), 0, 1, [1], [0])
    e = _with(e, u=np.full_like(e.u, 0.3))
    assert maximality_gap(p, e).max == 0.0


def test_constancy_lqr_and_bang(analytic):
    c = hamiltonian_constancy(LQR.problem, analytic["lqr-scalar"], 1e-9)
    assert abs(c.hbar - LQR_HBAR) <= 1e-7 and c.max_dev <= 1e-9 and c.passed
    e = analytic["bang-integrator"]
    assert 0.5 in e.grid
    c = hamiltonian_constancy(BANG.problem, e, 1e-12)
    assert c.hbar == pytest.approx(0.5, abs=1e-15) and c.max_dev <= 1e-12


def test_cross_check_fixture():
    # x = t, u = 1, psi = t, psi0 = -1, L = x1, phi = u1, omega = [-1, 1]
    # by hand: x' = 1 = u; psi' = 1 = -dH/dx = -psi0; psi >= 0 so u = 1 is a
    # maximizer (a tie only at t = 0); H = -t + t = 0.  Every condition holds.
    p = ControlProblem.from_text("x1", ["u1"], 1, Box((-1,), (1,)), 0, 1, [0], [None])
    g = np.linspace(0, 1, 51)
    e = Extremal(g, g, np.ones_like(g), -1.0, g)
    assert residual_control(p, e).max <= 1e-12
    assert residual_adjoint(p, e).max <= 1e-12
    assert maximality_gap(p, e).max <= 0.0
    c = hamiltonian_constancy(p, e, 1e-12)
    assert c.hbar == 0.0 and c.max_dev == 0.0
    assert verify_extremal(p, e, 1e-10).passed


def test_abnormal_multiplier_accepted():
    p = ControlProblem.from_text("x1", ["u1"], 1, Box((-1,), (1,)), 0, 1, [0], [None])
    g = np.linspace(0, 1, 11)
    e = Extremal(g, g, np.ones_like(g), 0.0, np.ones_like(g))
    r = verify_extremal(p, e, 1e-10)
    assert r.passed and r.hbar == 1.0


def test_shot_lqr_passes(solved):
    r = verify_extremal(LQR.problem, solved["lqr-scalar"], 1e-4)
    assert r.passed and r.failed == []
    assert r.notes[0] == "checked on 1001 grid nodes"


def test_rest_passes_tight(analytic):
    assert verify_extremal(REST.problem, analytic["rest"], 1e-12).passed


def test_flipped_lqr_fails_adjoint_and_maximality(analytic):
    e = analytic["lqr-scalar"]
    r = verify_extremal(LQR.problem, _with(e, psi=-e.psi), 1e-4)
    assert not r.passed
    assert {"adjoint system", "maximality"} <= set(r.failed)
    assert r.entry("control system").passed


def test_switch_nodes_counted(analytic):
    e = analytic["bang-integrator"]
    assert len(control_jumps(BANG.problem.omega, e.u)) == 1
    r = verify_extremal(BANG.problem, e, 1e-8)
    assert r.passed
    assert r.entry("control system").detail["switch_nodes"] == 2
    assert any("excluded" in n for n in r.notes)


def test_drift_note_when_only_theorem_fails():
    # fixed-step RK4 straight through the bang switch: the step that contains
    # the switch offsets x by O(h), which shifts H, while every residual off
    # the two switch nodes stays at round-off
    e = propagate(BANG.problem, [0.0], [-0.5], -1.0)
    r = verify_extremal(BANG.problem, e, 1e-8)
    assert r.failed == [THEOREM]
    assert 1e-5 < r.entry(THEOREM).max_residual < 1e-3
    assert any("numerical drift" in n for n in r.notes)


def test_tightening_never_flips_to_pass(solved):
    e = solved["harmonic-action"]
    prev = None
    for tol in (1e-2, 1e-6, 1e-10, 1e-13, 1e-16):
        r = verify_extremal(HARM.problem, e, tol)
        flags = [x.passed for x in r.entries]
        if prev is not None:
            assert all(p or not f for p, f in zip(prev, flags))
        prev = flags


@pytest.mark.parametrize("name", ["lqr-scalar", "harmonic-action", "rest", "bang-integrator"])
def test_constancy_follows_from_definition(name, solved):
    e = solved[name]
    p = catalog.get(name).problem
    base = verify_extremal(p, e, 1e-4)
    tau0 = max(x.max_residual for x in base.entries[:3])
    tau0 = max(tau0, 1e-14)
    c = hamiltonian_constancy(p, e, 100 * tau0)
    print(f"{name}: definition residual {tau0:.2e}, H deviation {c.max_dev:.2e}")
    assert c.passed


def test_time_translation():
    p0 = LQR.problem
    e0 = shoot(p0, -1.0, [-1.0])
    e5 = shoot(p0.shifted(5.0), -1.0, [-1.0])
    h0 = hamiltonian_constancy(p0, e0, 1e-6).hbar
    h5 = hamiltonian_constancy(p0.shifted(5.0), e5, 1e-6).hbar
    assert abs(h0 - h5) <= 1e-9


def test_report_deterministic_and_serializable(solved):
    e = solved["lqr-scalar"]
    a = verify_extremal(LQR.problem, e).to_dict()
    b = verify_extremal(LQR.problem, e).to_dict()
    assert a == b
    assert [x["name"] for x in a["entries"]] == ["control system", "adjoint system", "maximality", THEOREM]


def test_grid_mismatch():
    e = LQR.analytic_extremal(11)
    with pytest.raises(GridMismatch):
        verify_extremal(LQR.problem.shifted(1.0), e)
