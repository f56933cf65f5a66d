import math
import time

import numpy as np
import pytest

from pmpkit import catalog
from pmpkit.errors import IntegrationFailure, NoConvergence, UnboundedHamiltonian
from pmpkit.model import Box, ControlProblem, FiniteSet, OpenUnitInterval, Unconstrained, hamiltonian
from pmpkit.numerics import IntegratorConfig, ShootingConfig, maximize_hamiltonian, propagate, shoot

from conftest import COTH1

LQR = catalog.get("lqr-scalar").problem
BANG = catalog.get("bang-integrator").problem
HARM = catalog.get("harmonic-action").problem
REST = catalog.get("rest").problem


# maximization ---------------------------------------------------------------


def test_affine_box_examples():
    m = maximize_hamiltonian(BANG, [0], -1, [0.3])
    assert m.u.tolist() == [1.0] and m.h == pytest.approx(0.3, abs=1e-15) and not m.singular
    m = maximize_hamiltonian(BANG, [0], -1, [0.0])
    assert m.u.tolist() == [-1.0] and m.singular


def test_unconstrained_stationary_point():
    m = maximize_hamiltonian(LQR, [0], -1, [0.7])
    assert m.u[0] == pytest.approx(0.7, abs=1e-10)
    assert not m.singular


def test_unconstrained_unbounded():
    p = ControlProblem.from_text("u1^2", ["u1"], 1, Unconstrained(), 0, 1, [0], [0])
    with pytest.raises(UnboundedHamiltonian):
        maximize_hamiltonian(p, [0], 0.0, [1.0])  # psi0 = 0 leaves H = psi*u
    q = ControlProblem.from_text("-u1^2", ["u1"], 1, Unconstrained(), 0, 1, [0], [0])
    with pytest.raises(UnboundedHamiltonian):
        maximize_hamiltonian(q, [0], -1.0, [0.1])


def test_open_interval_not_maximized():
    p = ControlProblem.from_text("x1", ["u1"], 1, OpenUnitInterval(), 0, 1, [0], [0])
    with pytest.raises(ValueError):
        maximize_hamiltonian(p, [0], -1, [1])


def test_curved_box_interior_and_edge():
    p = ControlProblem.from_text("u1^2", ["u1"], 1, Box((-1,), (2,)), 0, 1, [0], [None])
    assert maximize_hamiltonian(p, [0], -1, [1.0]).u[0] == pytest.approx(0.5, abs=1e-10)
    assert maximize_hamiltonian(p, [0], -1, [10.0]).u[0] == 2.0


def test_flat_unconstrained_direction_is_singular():
    p = ControlProblem.from_text("u1^2", ["u1", "u2"], 2, Unconstrained(), 0, 1, [0, 0], [0, 0])
    m = maximize_hamiltonian(p, [0, 0], -1, [0.4, 0.0])
    assert m.u[0] == pytest.approx(0.2, abs=1e-9)
    assert m.singular


def _random_finite_problem(rng):
    r = int(rng.integers(1, 3))
    n = int(rng.integers(1, 3))
    pts = [tuple(rng.integers(-3, 4, size=r) / 2.0) for _ in range(int(rng.integers(1, 7)))]
    L = "x1*u1^2 - " + ("u2*x1" if r > 1 else "u1") + " + sin(u1)"
    phi = [f"u{1 + i % r} * x{1 + i}" for i in range(n)]
    return ControlProblem.from_text(L, phi, r, FiniteSet(pts), 0, 1, [0] * n, [None] * n)


def test_finite_set_equals_enumeration(rng):
    for _ in range(100):
        p = _random_finite_problem(rng)
        x, psi = rng.normal(size=p.n), rng.normal(size=p.n)
        vals = [hamiltonian(p, x, v, -1.0, psi) for v in p.omega.points]
        best = int(np.argmax(vals))  # first maximizer
        m = maximize_hamiltonian(p, x, -1.0, psi)
        assert m.u.tolist() == list(p.omega.points[best])
        assert m.h == vals[best]


def test_finite_set_tie_takes_first():
    p = ControlProblem.from_text("0", ["u1"], 1, FiniteSet([(2.0,), (-3.0,), (5.0,)]), 0, 1, [0], [0])
    m = maximize_hamiltonian(p, [0], -1.0, [0.0])
    assert m.u.tolist() == [2.0] and m.singular


def test_singleton_finite_set():
    p = ControlProblem.from_text("x1", ["u1"], 1, FiniteSet([(0.25,)]), 0, 1, [0], [0])
    m = maximize_hamiltonian(p, [1], -1.0, [3.0])
    assert m.u.tolist() == [0.25] and not m.singular


def test_affine_box_sign_rule(rng):
    for _ in range(100):
        r = int(rng.integers(1, 4))
        lo = rng.uniform(-3, 0, r)
        hi = lo + rng.uniform(0.1, 3, r)
        coef = rng.normal(size=r)
        if rng.random() < 0.3:
            coef[int(rng.integers(r))] = 0.0
        terms = " + ".join(f"({float(c)!r})*u{j + 1}" for j, c in enumerate(coef))
        p = ControlProblem.from_text(f"x1^2 - ({terms})", ["x1"], r, Box(lo, hi), 0, 1, [0], [None])
        x = rng.normal(size=1)
        m = maximize_hamiltonian(p, x, -1.0, [0.0])
        expected = np.where(coef > 0, hi, lo)
        assert np.array_equal(m.u, expected)
        assert m.singular == bool(np.any(coef == 0.0))


# propagation ----------------------------------------------------------------


def test_propagate_rest():
    e = propagate(REST, [0], [0], -1.0)
    assert np.all(e.x == 0) and np.all(e.u == 0) and np.all(e.info["H"] == 0)


def test_propagate_lqr_hits_target():
    e = propagate(LQR, [1.0], [-COTH1], -1.0, IntegratorConfig(h=1e-3))
    assert abs(e.x[-1, 0]) <= 1e-8
    assert len(e) == 1001 and e.grid[-1] == 1.0


def test_propagate_bang_switches():
    h = 1e-3
    e = propagate(BANG, [0.0], [-0.5], -1.0, IntegratorConfig(h=h))
    k = int(np.argmax(e.u[:, 0] > 0))
    assert abs(e.grid[k] - 0.5) <= h + 1e-12
    assert abs(e.x[-1, 0]) <= 1e-3


def test_propagate_rk45_lqr():
    e = propagate(LQR, [1.0], [-COTH1], -1.0, IntegratorConfig(method="rk45", atol=1e-12, rtol=1e-12))
    assert abs(e.x[-1, 0]) <= 1e-9


def test_propagate_domain_error_becomes_integration_failure():
    p = ControlProblem.from_text("u1^2", ["log(x1)"], 1, Unconstrained(), 0, 1, [1], [None])
    with pytest.raises(IntegrationFailure):
        propagate(p, [-1.0], [0.0], -1.0)


def test_step_budget():
    with pytest.raises(IntegrationFailure):
        propagate(LQR, [1.0], [-1.0], -1.0, IntegratorConfig(h=1e-3, max_steps=10))


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(h=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        ShootingConfig(damping=1.5)


# shooting -------------------------------------------------------------------


def test_shoot_lqr():
    t0 = time.perf_counter()
    e = shoot(LQR, -1.0, [-1.0])
    assert time.perf_counter() - t0 < 1.0
    assert abs(e.info["psi_a"][0] + COTH1) <= 1e-6
    assert e.info["iterations"] <= 10


def test_shoot_rest_and_harmonic():
    assert abs(shoot(REST, -1.0, [0.5]).info["psi_a"][0]) <= 1e-10
    assert abs(shoot(HARM, -1.0, [0.5]).info["psi_a"][0] - 1.0) <= 1e-6


def test_shoot_free_endpoint():
    # x' = u, cost (u^2 + (x-1)^2)/2 with x(0)=0 and x(1) free: psi(1) = 0
    p = ControlProblem.from_text("(u1^2 + (x1 - 1)^2)/2", ["u1"], 1, Unconstrained(), 0, 1, [0], [None])
    e = shoot(p, -1.0, [0.0])
    assert abs(e.psi[-1, 0]) <= 1e-10
    # closed form: x = 1 - cosh(1 - t)/cosh(1) and psi = x' = sinh(1 - t)/cosh(1)
    assert e.info["psi_a"][0] == pytest.approx(math.tanh(1.0), abs=1e-6)


def test_shoot_no_convergence_reports_residual():
    with pytest.raises(NoConvergence) as exc:
        shoot(LQR, -1.0, [-1.0], ShootingConfig(max_iter=1, tol=1e-300))
    assert exc.value.iterations == 1 and exc.value.residual_norm >= 0


def test_bang_rk4_staircase_does_not_converge():
    # with fixed-step RK4 x(1) moves in steps of about h/3 as psi(0) varies
    with pytest.raises(NoConvergence):
        shoot(BANG, -1.0, [-0.2])


def test_bang_with_catalog_overrides(solved):
    e = solved["bang-integrator"]
    assert abs(e.info["psi_a"][0] + 0.5) <= 1e-6
