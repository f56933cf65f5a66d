"""Benchmark problems with closed-form extremals.

Every entry is a normal extremal (``psi0 = -1``).  The analytic trajectories
double as oracles for the solver and the checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import UnknownEntry
from .model import Box, ControlProblem, Extremal, Unconstrained

Trajectory = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    description: str
    problem: ControlProblem
    x: Trajectory
    u: Trajectory
    psi: Trajectory
    psi_a_star: tuple[float, ...]
    hbar_star: float
    cost_star: float
    note: str = ""
    switch_times: tuple[float, ...] = ()
    smooth: bool = True
    psi0: float = -1.0
    solver: dict = field(default_factory=dict)  # overrides carried into exported problem files

    @property
    def default_guess(self) -> tuple[float, ...]:
        return tuple(v + 0.3 for v in self.psi_a_star)

    def analytic_extremal(self, nodes: int = 2001) -> Extremal:
        """Closed-form extremal sampled on ``nodes`` equispaced points plus every switch time."""
        p = self.problem
        grid = np.union1d(np.linspace(p.a, p.b, nodes), self.switch_times)
        return Extremal(grid, self.x(grid), self.u(grid), self.psi0, self.psi(grid))


def _col(f):
    return lambda t: np.asarray(f(np.asarray(t, dtype=float)), dtype=float).reshape(-1, 1)


_S1 = math.sinh(1.0)

_ENTRIES = {
    "lqr-scalar": CatalogEntry(
        name="lqr-scalar",
        description="scalar linear-quadratic regulator driven from x=1 to x=0 on [0, 1]",
        problem=ControlProblem.from_text(
            "(x1^2 + u1^2)/2", ["u1"], 1, Unconstrained(), 0.0, 1.0, [1.0], [0.0], name="lqr-scalar"
        ),
        x=_col(lambda t: np.sinh(1.0 - t) / _S1),
        u=_col(lambda t: -np.cosh(1.0 - t) / _S1),
        psi=_col(lambda t: -np.cosh(1.0 - t) / _S1),
        psi_a_star=(-1.0 / math.tanh(1.0),),
        hbar_star=1.0 / (2.0 * _S1 ** 2),
        cost_star=0.5 / math.tanh(1.0),
        note="x(t) = sinh(1-t)/sinh(1), psi = u = x'",
    ),
    "bang-integrator": CatalogEntry(
        name="bang-integrator",
        description="minimize the area under x for x' = u, |u| <= 1, x(0) = x(1) = 0",
        problem=ControlProblem.from_text(
            "x1", ["u1"], 1, Box((-1.0,), (1.0,)), 0.0, 1.0, [0.0], [0.0], name="bang-integrator"
        ),
        x=_col(lambda t: np.where(t <= 0.5, -t, t - 1.0)),
        u=_col(lambda t: np.where(t <= 0.5, -1.0, 1.0)),
        psi=_col(lambda t: t - 0.5),
        psi_a_star=(-0.5,),
        hbar_star=0.5,
        cost_star=-0.25,
        note="psi(t) = t - 1/2; bang-bang control switching at t = 1/2",
        switch_times=(0.5,),
        smooth=False,
        # fixed-step RK4 leaves x(1) on a staircase of height h/3 in psi(0), so
        # shooting uses the adaptive integrator and a coarser Jacobian step
        solver={"method": "rk45", "h": 1e-2, "atol": 1e-12, "rtol": 1e-10, "fd_scale": 1e-5, "tol": 1e-8},
    ),
    "harmonic-action": CatalogEntry(
        name="harmonic-action",
        description="harmonic oscillator action, x(0) = 0 to x(pi/2) = 1; H is the total energy",
        problem=ControlProblem.from_text(
            "(u1^2 - x1^2)/2", ["u1"], 1, Unconstrained(), 0.0, math.pi / 2, [0.0], [1.0],
            name="harmonic-action",
        ),
        x=_col(np.sin),
        u=_col(np.cos),
        psi=_col(np.cos),
        psi_a_star=(1.0,),
        hbar_star=0.5,
        cost_star=0.0,
        note="x = sin t, psi = u = cos t; constancy of H is conservation of energy",
    ),
    "rest": CatalogEntry(
        name="rest",
        description="x' = u with quadratic effort and x(0) = x(1) = 0: the rest solution",
        problem=ControlProblem.from_text(
            "u1^2", ["u1"], 1, Unconstrained(), 0.0, 1.0, [0.0], [0.0], name="rest"
        ),
        x=_col(np.zeros_like),
        u=_col(np.zeros_like),
        psi=_col(np.zeros_like),
        psi_a_star=(0.0,),
        hbar_star=0.0,
        cost_star=0.0,
        note="x = u = psi = 0",
    ),
}


def get(name: str) -> CatalogEntry:
    try:
        return _ENTRIES[name]
    except KeyError:
        raise UnknownEntry(name) from None


def list_entries() -> list[tuple[str, str]]:
    return [(e.name, e.description) for e in _ENTRIES.values()]


def names() -> list[str]:
    return list(_ENTRIES)
