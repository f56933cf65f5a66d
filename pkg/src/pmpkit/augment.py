"""Time-augmented auxiliary problem.

The autonomous problem on ``[a, b]`` is re-posed on ``[alpha, beta]`` with an
extra state ``s`` and an extra control ``v in (0, 1)`` through the change of
variable ``t = tau - s(tau)``::

    minimize   int L(z, w) (1 - v) dtau
    subject to z' = phi(z, w) (1 - v),   s' = v,
               s(alpha) = alpha - a,     s(beta) = beta - b.

Its Hamiltonian ``H(z, w, p0, p_z) (1 - v) + p_s v`` has no ``s`` in it, so
``p_s`` is constant; stationarity in ``v`` forces ``p_s = H``.  Lifting a
solved extremal into this problem and checking both identities numerically
certifies that the base Hamiltonian is constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator

from .backend import build_kernel
from .errors import GridMismatch, HorizonTooShort, VBarOutOfRange
from .expr import Binary, Const, Expr, Sym
from .model import (
    BoundarySpec,
    ControlProblem,
    Extremal,
    OpenUnitInterval,
    hamiltonian,
    hamiltonian_values,
    validate,
)
from .verify import (
    CheckEntry,
    VerificationReport,
    _stats,
    control_jumps,
    derivative,
    switch_nodes,
    verify_extremal,
)


@dataclass(frozen=True)
class AugmentedProblem:
    base: ControlProblem
    alpha: float
    beta: float

    @property
    def n(self) -> int:
        return self.base.n + 1

    @property
    def r(self) -> int:
        return self.base.r + 1

    @property
    def s_boundary(self) -> tuple[float, float]:
        return (self.alpha - self.base.a, self.beta - self.base.b)

    @property
    def omega_w(self):
        return self.base.omega

    @property
    def omega_v(self) -> OpenUnitInterval:
        return OpenUnitInterval()

    @property
    def boundary(self) -> BoundarySpec:
        s0, s1 = self.s_boundary
        bd = self.base.boundary
        return BoundarySpec(bd.initial + (s0,), bd.final + (s1,))

    @cached_property
    def _one_minus_v(self):
        return Binary("-", Const(1.0), Sym("u", self.r))

    @cached_property
    def L(self) -> Expr:
        """``L(z, w) * (1 - v)`` over states ``(z, s)`` and controls ``(w, v)``."""
        return Expr(Binary("*", self.base.L.tree, self._one_minus_v), self.n, self.r)

    @cached_property
    def phi(self) -> tuple[Expr, ...]:
        scaled = [Expr(Binary("*", e.tree, self._one_minus_v), self.n, self.r) for e in self.base.phi]
        return tuple(scaled) + (Expr(Sym("u", self.r), self.n, self.r),)

    @cached_property
    def kernel(self):
        return build_kernel(self.n, self.r, [self.L.tree] + [e.tree for e in self.phi])


def augment(p: ControlProblem, alpha: float, beta: float) -> AugmentedProblem:
    defects = validate(p)
    if defects:
        raise ValueError(f"cannot augment an ill-formed problem: {'; '.join(defects)}")
    alpha, beta = float(alpha), float(beta)
    if not beta - alpha > p.b - p.a:
        raise HorizonTooShort(
            f"beta - alpha = {beta - alpha} must exceed b - a = {p.b - p.a} for s' in (0, 1)"
        )
    return AugmentedProblem(p, alpha, beta)


def augmented_hamiltonian(ap: AugmentedProblem, z, w, v: float, p0: float, p_z, p_s: float) -> float:
    """``H(z, w, p0, p_z) * (1 - v) + p_s * v`` for ``v`` strictly inside (0, 1)."""
    if not 0.0 < v < 1.0:
        raise ValueError(f"v = {v} lies outside the open interval (0, 1)")
    return hamiltonian(ap.base, z, w, p0, p_z) * (1.0 - v) + p_s * v


@dataclass(frozen=True, eq=False)
class LiftedExtremal:
    tau: np.ndarray
    z: np.ndarray
    s: np.ndarray
    w: np.ndarray
    v: np.ndarray
    p0: float
    p_z: np.ndarray
    p_s: np.ndarray
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("tau", "z", "s", "w", "v", "p_z", "p_s"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.p0 <= 0.0:
            raise ValueError("p0 must be non-positive")
        slope = np.diff(self.s) / np.diff(self.tau)
        if not (np.all(np.diff(self.tau) > 0) and np.all(slope > 0) and np.all(slope < 1)):
            raise ValueError("s must increase with slope strictly inside (0, 1)")

    @property
    def t(self) -> np.ndarray:
        return self.tau - self.s

    def __len__(self):
        return self.tau.shape[0]


def _interp_controls(grid, u, t, piecewise_constant):
    if u.shape[1] == 0:
        return np.zeros((len(t), 0))
    if not piecewise_constant:
        return PchipInterpolator(grid, u, axis=0)(t)
    tol = 1e-12 * (1.0 + np.abs(t))
    idx = np.clip(np.searchsorted(grid, t + tol, side="right") - 1, 0, len(grid) - 1)
    return u[idx]


def lift(p: ControlProblem, e: Extremal, v_bar: float, alpha: float = 0.0, tau=None,
         check_tol: float | None = None) -> LiftedExtremal:
    """Lift ``e`` into the augmented problem along the affine ``s`` with slope ``v_bar``.

    By default the tau grid is the image of ``e.grid``; pass ``tau`` to
    resample onto another grid in ``[alpha, beta]``.
    """
    if not 0.0 < v_bar < 1.0:
        raise VBarOutOfRange(f"v_bar = {v_bar} must lie in (0, 1)")
    if check_tol is not None:
        report = verify_extremal(p, e, check_tol)
        if not report.passed:
            raise ValueError(f"not an extremal at tol={check_tol}: failed {report.failed}")
    alpha = float(alpha)
    beta = alpha + (p.b - p.a) / (1.0 - v_bar)
    if tau is None:
        tau = alpha + (e.grid - p.a) / (1.0 - v_bar)
        tau[0], tau[-1] = alpha, beta
    tau = np.asarray(tau, dtype=float)
    if tau[0] < alpha - 1e-12 or tau[-1] > beta + 1e-12:
        raise GridMismatch("tau grid must lie within [alpha, beta]")
    s = (alpha - p.a) + v_bar * (tau - alpha)
    t = np.clip(tau - s, p.a, p.b)
    piecewise = (e.singular is not None and bool(np.any(e.singular))) or len(control_jumps(p.omega, e.u)) > 0
    z = PchipInterpolator(e.grid, e.x, axis=0)(t)
    p_z = PchipInterpolator(e.grid, e.psi, axis=0)(t)
    w = _interp_controls(e.grid, e.u, t, piecewise)
    hbar = float(np.mean(hamiltonian_values(p, e)))
    m = len(tau)
    return LiftedExtremal(tau, z, s, w, np.full(m, v_bar), e.psi0, p_z, np.full(m, hbar), alpha, beta)


def restrict(p: ControlProblem, le: LiftedExtremal) -> Extremal:
    """Map a lifted extremal back through ``t = tau - s(tau)``."""
    return Extremal(le.t, le.z, le.w, le.p0, le.p_z)


def lifted_hamiltonian(ap: AugmentedProblem, le: LiftedExtremal) -> np.ndarray:
    return np.array([
        augmented_hamiltonian(ap, le.z[k], le.w[k], le.v[k], le.p0, le.p_z[k], le.p_s[k])
        for k in range(len(le))
    ])


def augmented_cost(ap: AugmentedProblem, le: LiftedExtremal) -> float:
    """Trapezoidal ``int L(z, w) (1 - v) dtau`` along the lift."""
    X, U = _stacked(le)
    vals = np.array([ap.kernel.value(0, X[k], U[k]) for k in range(len(le))])
    return float(np.trapezoid(vals, le.tau))


def _stacked(le: LiftedExtremal):
    X = np.column_stack([le.z, le.s])
    U = np.column_stack([le.w, le.v]) if le.w.shape[1] else le.v[:, None].copy()
    return X, U


def verify_lift(ap: AugmentedProblem, le: LiftedExtremal, tol: float = 1e-6) -> VerificationReport:
    """Check the lifted extremal against the augmented problem.

    Entries: augmented dynamics, the ``p_z`` adjoint equation, constancy of
    ``p_s`` (``dH/ds = 0``), and stationarity ``dH/dv = p_s - H = 0``.
    """
    if le.tau[0] < ap.alpha - 1e-12 or le.tau[-1] > ap.beta + 1e-12:
        raise GridMismatch("lifted grid lies outside [alpha, beta]")
    if le.z.shape[1] != ap.base.n or le.w.shape[1] != ap.base.r:
        raise GridMismatch("lifted extremal dimensions do not match the problem")
    if not np.all((le.v > 0.0) & (le.v < 1.0)):
        raise ValueError("v samples must lie strictly inside (0, 1)")
    n = ap.base.n
    kern = ap.kernel
    X, U = _stacked(le)
    P = np.column_stack([le.p_z, le.p_s])
    m = len(le)
    jumps = control_jumps(ap.base.omega, le.w)
    excluded = switch_nodes(jumps)

    rhs = np.empty((m, n + 1))
    dH_dstate = np.empty((m, n + 1))
    dH_dv = np.empty(m)
    for k in range(m):
        dx, f = kern.partials(X[k], U[k], le.p0, P[k])
        rhs[k] = f
        dH_dstate[k] = dx
        dH_dv[k] = kern.hamiltonian_grad_u(X[k], U[k], le.p0, P[k])[-1]
    H = hamiltonian_values(ap.base, Extremal(le.t, le.z, le.w, le.p0, le.p_z)) if m >= 2 else np.array([])

    dyn = np.max(np.abs(derivative(le.tau, X, jumps) - rhs), axis=1)
    adj = np.max(np.abs(derivative(le.tau, le.p_z, jumps) + dH_dstate[:, :n]), axis=1)
    dps = np.abs(np.diff(le.p_s))
    ps_resid = np.concatenate([[0.0], dps]) + np.abs(dH_dstate[:, n])
    stat = np.abs(dH_dv)

    st_dyn = _stats(le.tau, dyn, excluded)
    st_adj = _stats(le.tau, adj, excluded)
    k_ps = int(np.argmax(ps_resid))
    k_st = int(np.argmax(stat))
    entries = [
        CheckEntry("augmented dynamics", st_dyn.max, st_dyn.location, tol, st_dyn.max <= tol,
                   {"nodes_checked": st_dyn.checked, "switch_nodes": st_dyn.switch_nodes}),
        CheckEntry("augmented adjoint (p_z)", st_adj.max, st_adj.location, tol, st_adj.max <= tol,
                   {"nodes_checked": st_adj.checked, "switch_nodes": st_adj.switch_nodes}),
        CheckEntry("p_s constant (dH/ds = 0)", float(ps_resid[k_ps]), float(le.tau[k_ps]), tol,
                   bool(ps_resid[k_ps] <= tol),
                   {"max_step_change": float(dps.max(initial=0.0)),
                    "max_abs_dH_ds": float(np.max(np.abs(dH_dstate[:, n])))}),
        CheckEntry("stationarity in v (p_s = H)", float(stat[k_st]), float(le.tau[k_st]), tol,
                   bool(stat[k_st] <= tol),
                   {"max_abs_ps_minus_H": float(np.max(np.abs(le.p_s - H))) if len(H) else 0.0}),
    ]
    notes = [f"checked on {m} tau nodes in [{ap.alpha}, {ap.beta}]"]
    if len(excluded):
        notes.append(f"{len(excluded)} nodes adjacent to control switches excluded from "
                     "finite-difference residual maxima")
    return VerificationReport(entries, float(np.mean(le.p_s)), all(x.passed for x in entries), m, notes)
