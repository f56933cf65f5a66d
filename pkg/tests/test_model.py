import math

import numpy as np
import pytest

from pmpkit import catalog
from pmpkit.errors import GridMismatch
from pmpkit.model import (
    BoundarySpec,
    Box,
    ControlProblem,
    Extremal,
    FiniteSet,
    OpenUnitInterval,
    Unconstrained,
    cost,
    dynamics,
    hamiltonian,
    hamiltonian_partials,
    validate,
)
from pmpkit.numerics import maximize_hamiltonian

from conftest import LQR_COST

LQR = catalog.get("lqr-scalar").problem
BANG = catalog.get("bang-integrator").problem
HARM = catalog.get("harmonic-action").problem


def test_hamiltonian_examples():
    assert hamiltonian(LQR, [1], [1], -1, [2]) == 1.0
    assert hamiltonian(LQR, [0.3], [-2], 0.0, [0.0]) == 0.0
    assert hamiltonian(BANG, [0], [-1], -1, [-0.5]) == 0.5


def test_partials_examples():
    dx, dpsi = hamiltonian_partials(LQR, [1], [1], -1, [2])
    assert dx.tolist() == [-1.0] and dpsi.tolist() == [1.0]
    dx, _ = hamiltonian_partials(LQR, [1], [1], 0.0, [1])
    assert dx.tolist() == [0.0]
    dx, _ = hamiltonian_partials(HARM, [1], [0], -1, [0])
    assert dx.tolist() == [1.0]


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        hamiltonian(LQR, [1, 2], [1], -1, [2])


def test_linear_in_costate(rng):
    p = ControlProblem.from_text("x1^2 + u1*x2", ["sin(x2) + u1", "x1*u1"], 1, Unconstrained(), 0, 1,
                                 [0, 0], [None, None])
    for _ in range(100):
        x, u, psi = rng.normal(size=2), rng.normal(size=1), rng.normal(size=2)
        c = rng.normal()
        phi = dynamics(p, x, u)
        lhs = hamiltonian(p, x, u, -1, c * psi) - hamiltonian(p, x, u, -1, 0 * psi)
        assert abs(lhs - c * (psi @ phi)) <= 1e-12 * (1 + abs(lhs))


def test_dH_dpsi_is_phi_exactly(rng):
    p = ControlProblem.from_text("x1*u1", ["exp(x1)*u1", "x2/(1 + u1^2)"], 1, Unconstrained(), 0, 1,
                                 [0, 0], [None, None])
    for _ in range(50):
        x, u, psi = rng.normal(size=2), rng.normal(size=1), rng.normal(size=2)
        _, dpsi = hamiltonian_partials(p, x, u, -1.0, psi)
        assert dpsi.tolist() == [p.phi[0].eval(x, u), p.phi[1].eval(x, u)]


def test_positive_homogeneity_keeps_argmax(rng):
    pts = [(-1.0,), (0.0,), (0.5,), (2.0,)]
    p = ControlProblem.from_text("x1*u1 + u1^2", ["u1 - x1"], 1, FiniteSet(pts), 0, 1, [0], [None])
    for _ in range(50):
        x, psi, lam = rng.normal(size=1), rng.normal(size=1), rng.uniform(0.1, 10)
        u1 = maximize_hamiltonian(p, x, -1.0, psi)
        u2 = maximize_hamiltonian(p, x, -lam, lam * psi)
        assert np.array_equal(u1.u, u2.u)
        assert math.isclose(hamiltonian(p, x, [0.5], -lam, lam * psi), lam * hamiltonian(p, x, [0.5], -1, psi),
                            rel_tol=1e-12, abs_tol=1e-12)


def test_cost_examples():
    g = np.linspace(0, 1, 11)
    zero = Extremal(g, np.zeros(11), np.zeros(11), -1, np.zeros(11))
    rest = catalog.get("rest").problem
    assert cost(rest, zero) == 0.0
    lqr = catalog.get("lqr-scalar").analytic_extremal(1001)
    assert abs(cost(LQR, lqr) - LQR_COST) <= 1e-5
    bang = catalog.get("bang-integrator").analytic_extremal(1001)
    assert abs(cost(BANG, bang) + 0.25) <= 1e-12


def test_cost_grid_mismatch():
    e = Extremal(np.linspace(0, 0.9, 5), np.zeros(5), np.zeros(5), -1, np.zeros(5))
    with pytest.raises(GridMismatch):
        cost(LQR, e)


def test_validate_examples():
    assert validate(LQR) == []
    bad = ControlProblem.from_text("x1", ["u1"], 1, Unconstrained(), 1, 1, [0], [0])
    assert "empty horizon" in validate(bad)
    inv = ControlProblem.from_text("x1", ["u1"], 1, Box((1,), (0,)), 0, 1, [0], [0])
    assert "inverted box" in validate(inv)


def test_validate_more_defects():
    anchorless = ControlProblem.from_text("x1", ["u1"], 1, Unconstrained(), 0, 1, [None], [0])
    assert "no state coordinate fixed at t=a" in validate(anchorless)
    assert "empty finite control set" in validate(
        ControlProblem.from_text("x1", ["u1"], 1, FiniteSet(()), 0, 1, [0], [0]))
    assert any("open unit interval" in d for d in validate(
        ControlProblem.from_text("x1", ["u1"], 2, OpenUnitInterval(), 0, 1, [0], [0])))
    assert any("box bounds" in d for d in validate(
        ControlProblem.from_text("x1", ["u1"], 1, Box((0, 0), (1, 1)), 0, 1, [0], [0])))
    assert any("boundary" in d for d in validate(
        ControlProblem.from_text("x1", ["u1"], 1, Unconstrained(), 0, 1, [0, 1], [0])))


def test_validate_free_final_is_fine():
    p = ControlProblem.from_text("x1", ["u1"], 1, Box((-1,), (1,)), 0, 1, [0], [None])
    assert validate(p) == []


def test_extremal_invariants():
    g = np.linspace(0, 1, 4)
    with pytest.raises(ValueError):
        Extremal(g, np.zeros(4), np.zeros(4), 0.5, np.ones(4))
    with pytest.raises(ValueError):
        Extremal(g, np.zeros(4), np.zeros(4), 0.0, np.zeros(4))
    with pytest.raises(GridMismatch):
        Extremal(g[::-1], np.zeros(4), np.zeros(4), -1, np.ones(4))
    e = Extremal(g, np.zeros(4), np.zeros(4), 0.0, np.ones(4))  # abnormal is allowed
    assert e.psi0 == 0.0 and e.n == 1 and e.r == 1 and len(e) == 4
    with pytest.raises(ValueError):
        e.x[0, 0] = 1.0


def test_open_unit_interval_membership():
    assert OpenUnitInterval().contains([0.5])
    assert not OpenUnitInterval().contains([0.0])
    assert not OpenUnitInterval().contains([1.0])


def test_shifted_problem():
    q = LQR.shifted(5.0)
    assert (q.a, q.b) == (5.0, 6.0) and q.L == LQR.L


def test_boundary_spec():
    bd = BoundarySpec((1, None), (None, 2))
    assert bd.fixed_initial == [0] and bd.fixed_final == [1]
