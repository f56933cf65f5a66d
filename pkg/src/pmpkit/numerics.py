"""Pointwise Hamiltonian maximization, the coupled state/costate flow, and
single shooting on the initial costate."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DomainError, IntegrationFailure, NoConvergence, UnboundedHamiltonian
from .model import ControlProblem, Extremal, OpenUnitInterval, _vec

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"  # "rk4" (fixed step) or "rk45" (adaptive Dormand-Prince)
    h: float = 1e-3
    atol: float = 1e-10
    rtol: float = 1e-8
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown integration method {self.method!r}")
        if not self.h > 0:
            raise ValueError("step h must be positive")
        if not (self.atol > 0 and self.rtol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class ShootingConfig:
    max_iter: int = 20
    tol: float = 1e-10
    fd_scale: float = math.sqrt(EPS)  # Jacobian step is fd_scale * (1 + |z_i|)
    damping: float = 1.0
    max_halvings: int = 8

    def __post_init__(self):
        if self.max_iter < 1 or not self.tol > 0 or not self.fd_scale > 0:
            raise ValueError("shooting parameters must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


class MaxResult(NamedTuple):
    u: np.ndarray
    h: float
    singular: bool


def maximize_hamiltonian(p: ControlProblem, x, psi0: float, psi) -> MaxResult:
    """Maximize ``v -> H(x, v, psi0, psi)`` over the control region.

    Finite sets are enumerated; boxes with a control-affine Hamiltonian use the
    per-coordinate sign rule; everything else runs a coordinate grid seed,
    damped projected ascent and golden-section refinement.  Ties resolve to
    the lexicographically smallest maximizer and set ``singular``.
    """
    if isinstance(p.omega, OpenUnitInterval):
        raise ValueError("the open unit interval has no maximizer in general; not supported here")
    u, h, singular = p.kernel.maximize(_vec(x, p.n, "x"), float(psi0), _vec(psi, p.n, "psi"))
    return MaxResult(u, h, singular)


def _steps(a: float, b: float, h: float) -> int:
    return max(1, math.ceil((b - a) / h * (1.0 - 1e-12)))


def propagate(p: ControlProblem, x_a, psi_a, psi0: float, cfg: IntegratorConfig = IntegratorConfig()) -> Extremal:
    """Integrate ``x' = dH/dpsi``, ``psi' = -dH/dx`` from ``a`` to ``b`` with the
    maximizing control substituted at every derivative evaluation."""
    x_a = _vec(x_a, p.n, "x_a")
    psi_a = _vec(psi_a, p.n, "psi_a")
    try:
        if cfg.method == "rk4":
            N = _steps(p.a, p.b, cfg.h)
            if N > cfg.max_steps:
                raise IntegrationFailure(f"{N} steps exceed max_steps={cfg.max_steps}")
            X, U, PSI, H, S = p.kernel.rk4(x_a, psi_a, float(psi0), p.a, p.b, N)
            grid = np.linspace(p.a, p.b, N + 1)
        else:
            grid, X, U, PSI, H, S = _dopri(p, x_a, psi_a, float(psi0), cfg)
    except DomainError as exc:
        raise IntegrationFailure(f"expression domain error during integration: {exc}") from exc
    return Extremal(grid, X, U, psi0, PSI, singular=S, info={"method": cfg.method, "H": H})


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)


def _dopri(p: ControlProblem, x_a, psi_a, psi0, cfg: IntegratorConfig):
    n = p.n
    kern = p.kernel

    def f(y):
        dx, dpsi = kern.rhs(y[:n], y[n:], psi0)
        return np.concatenate([dx, dpsi])

    t, b = p.a, p.b
    y = np.concatenate([x_a, psi_a])
    h = min(cfg.h, b - t)
    ts, ys = [t], [y]
    steps = 0
    while t < b:
        if steps >= cfg.max_steps:
            raise IntegrationFailure(f"max_steps={cfg.max_steps} reached at t={t}")
        if h < 1e-14 * (1.0 + abs(t)):
            raise IntegrationFailure(f"step size underflow at t={t}")
        h = min(h, b - t)
        k = [f(y)]
        for i in range(1, 7):
            k.append(f(y + h * sum(a * kk for a, kk in zip(_A[i], k))))
        y5 = y + h * sum(c * kk for c, kk in zip(_B5, k))
        y4 = y + h * sum(c * kk for c, kk in zip(_B4, k))
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.sqrt(np.mean(((y5 - y4) / scale) ** 2)))
        steps += 1
        if err <= 1.0:
            t = b if b - t <= h else t + h
            y = y5
            ts.append(t)
            ys.append(y)
        factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        h *= factor
    Y = np.array(ys)
    grid = np.array(ts)
    U, H, S = [], [], []
    for row in Y:
        u, hv, s = kern.maximize(row[:n], psi0, row[n:])
        U.append(u)
        H.append(hv)
        S.append(s)
    return grid, Y[:, :n], np.array(U).reshape(len(grid), p.r), Y[:, n:], np.array(H), np.array(S)


# ---------------------------------------------------------------------------
# shooting


def _initial_conditions(p: ControlProblem, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split the unknown vector into ``(x(a), psi(a))``.

    Coordinate ``i`` of ``z`` is ``psi_i(a)`` when ``x_i(a)`` is fixed, and
    ``x_i(a)`` itself when it is free (its costate then starts at zero).
    """
    x_a = np.empty(p.n)
    psi_a = np.empty(p.n)
    for i, v in enumerate(p.boundary.initial):
        if v is None:
            x_a[i] = z[i]
            psi_a[i] = 0.0
        else:
            x_a[i] = v
            psi_a[i] = z[i]
    return x_a, psi_a


def _residual(p: ControlProblem, e: Extremal) -> np.ndarray:
    out = np.empty(p.n)
    for i, v in enumerate(p.boundary.final):
        out[i] = e.psi[-1, i] if v is None else e.x[-1, i] - v
    return out


def shoot(p: ControlProblem, psi0: float, guess, cfg: ShootingConfig = ShootingConfig(),
          icfg: IntegratorConfig = IntegratorConfig()) -> Extremal:
    """Damped Newton iteration on the initial costate until the endpoint
    conditions hold.  Returns the converged extremal; ``info`` records the
    iteration count and final residual."""
    z = _vec(guess, p.n, "guess").copy()

    def run(zv):
        x_a, psi_a = _initial_conditions(p, zv)
        e = propagate(p, x_a, psi_a, psi0, icfg)
        return e, _residual(p, e)

    e, res = run(z)
    norm = float(np.max(np.abs(res)))
    iterations = 0
    while norm > cfg.tol:
        if iterations >= cfg.max_iter:
            raise NoConvergence("shooting did not converge", norm, iterations)
        J = np.empty((p.n, p.n))
        for i in range(p.n):
            dz = cfg.fd_scale * (1.0 + abs(z[i]))
            zp = z.copy()
            zp[i] += dz
            J[:, i] = (run(zp)[1] - res) / dz
        step = np.linalg.lstsq(J, -res, rcond=None)[0]
        lam = cfg.damping
        for _ in range(cfg.max_halvings + 1):
            trial = z + lam * step
            try:
                e_t, res_t = run(trial)
                norm_t = float(np.max(np.abs(res_t)))
            except (IntegrationFailure, UnboundedHamiltonian):
                norm_t = math.inf
            if norm_t < norm:
                break
            lam *= 0.5
        else:
            raise NoConvergence("damped Newton step failed to reduce the residual", norm, iterations)
        z, e, res, norm = trial, e_t, res_t, norm_t
        iterations += 1
        log.debug("shoot iteration %d: residual %.3e (lambda=%g)", iterations, norm, lam)
    x_a, psi_a = _initial_conditions(p, z)
    info = dict(e.info, iterations=iterations, residual_norm=norm, unknowns=z.tolist(), psi_a=psi_a.tolist())
    return Extremal(e.grid, e.x, e.u, e.psi0, e.psi, singular=e.singular, info=info)
