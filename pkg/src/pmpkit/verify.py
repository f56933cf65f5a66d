"""Machine checks of a sampled candidate extremal.

Four checks: the control system, the adjoint system, the maximality
condition, and constancy of the Hamiltonian along the trajectory.  The last
one is a necessary consequence of the first three for autonomous problems.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.stats import qmc

from .model import (
    Box,
    ControlProblem,
    Extremal,
    FiniteSet,
    OpenUnitInterval,
    Unconstrained,
    _check_span,
    hamiltonian_values,
)

THEOREM = "Theorem (necessary consequence)"
STENCIL = 5
UNCONSTRAINED_SAMPLE_RADIUS = 10.0


@dataclass
class CheckEntry:
    name: str
    max_residual: float
    location: Optional[float]
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    entries: list[CheckEntry]
    hbar: float
    passed: bool
    nodes: int
    notes: list[str] = field(default_factory=list)

    def entry(self, name: str) -> CheckEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    @property
    def failed(self) -> list[str]:
        return [e.name for e in self.entries if not e.passed]

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# finite differences


def fd_weights(z: float, nodes: np.ndarray) -> np.ndarray:
    """First-derivative weights at ``z`` over ``nodes`` (Fornberg's recursion)."""
    m = len(nodes)
    c = np.zeros((m, 2))
    c1, c4 = 1.0, nodes[0] - z
    c[0, 0] = 1.0
    for i in range(1, m):
        mn = min(i, 1)
        c2, c5 = 1.0, c4
        c4 = nodes[i] - z
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, 1]


def segments(n_nodes: int, jumps: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive index ranges between control jumps (jump k separates k and k+1)."""
    cuts = sorted(int(j) for j in jumps)
    out, start = [], 0
    for j in cuts:
        out.append((start, j))
        start = j + 1
    out.append((start, n_nodes - 1))
    return out


def derivative(grid: np.ndarray, values: np.ndarray, jumps=()) -> np.ndarray:
    """Fourth-order finite-difference derivative that never differences across a jump."""
    values = np.asarray(values, dtype=float)
    out = np.full(values.shape, np.nan)
    for s, e in segments(len(grid), np.asarray(jumps, dtype=int)):
        size = e - s + 1
        if size < 2:
            continue
        width = min(STENCIL, size)
        for k in range(s, e + 1):
            lo = min(max(k - width // 2, s), e - width + 1)
            idx = slice(lo, lo + width)
            out[k] = fd_weights(grid[k], grid[idx]) @ values[idx]
    return out


def control_jumps(omega, u: np.ndarray) -> np.ndarray:
    """Indices k where ``|u[k+1] - u[k]|`` exceeds half the region diameter."""
    if isinstance(omega, (Unconstrained,)) or u.shape[1] == 0 or len(u) < 2:
        return np.array([], dtype=int)
    diam = omega.diameter()
    if not math.isfinite(diam) or diam == 0.0:
        return np.array([], dtype=int)
    step = np.linalg.norm(np.diff(u, axis=0), axis=1)
    return np.nonzero(step > diam / 2)[0]


def switch_nodes(jumps: np.ndarray) -> np.ndarray:
    return np.unique(np.concatenate([jumps, jumps + 1])).astype(int) if len(jumps) else np.array([], dtype=int)


class ResidualStats(NamedTuple):
    max: float
    mean: float
    location: Optional[float]
    checked: int
    switch_nodes: int
    switch_max: float


def _stats(grid: np.ndarray, resid: np.ndarray, excluded: np.ndarray) -> ResidualStats:
    mask = np.ones(len(grid), dtype=bool)
    mask[excluded] = False
    mask &= np.isfinite(resid)
    sw = resid[excluded] if len(excluded) else np.array([])
    sw = sw[np.isfinite(sw)]
    if not mask.any():
        return ResidualStats(0.0, 0.0, None, 0, len(excluded), float(sw.max()) if sw.size else 0.0)
    k = int(np.argmax(np.where(mask, resid, -np.inf)))
    return ResidualStats(
        float(resid[k]),
        float(resid[mask].mean()),
        float(grid[k]),
        int(mask.sum()),
        len(excluded),
        float(sw.max()) if sw.size else 0.0,
    )


# ---------------------------------------------------------------------------
# the four checks


def residual_control(p: ControlProblem, e: Extremal) -> ResidualStats:
    """``max |x'(t) - phi(x, u)|`` with x' by finite differences on the grid."""
    _check_span(p, e)
    jumps = control_jumps(p.omega, e.u)
    xdot = derivative(e.grid, e.x, jumps)
    phi = np.array([p.kernel.partials(e.x[k], e.u[k], 0.0, np.zeros(p.n))[1] for k in range(len(e))])
    resid = np.max(np.abs(xdot - phi), axis=1)
    return _stats(e.grid, resid, switch_nodes(jumps))


def residual_adjoint(p: ControlProblem, e: Extremal) -> ResidualStats:
    """``max |psi'(t) + dH/dx|`` with psi' by finite differences on the grid."""
    _check_span(p, e)
    jumps = control_jumps(p.omega, e.u)
    psidot = derivative(e.grid, e.psi, jumps)
    dHdx = np.array([p.kernel.partials(e.x[k], e.u[k], e.psi0, e.psi[k])[0] for k in range(len(e))])
    resid = np.max(np.abs(psidot + dHdx), axis=1)
    return _stats(e.grid, resid, switch_nodes(jumps))


def region_samples(omega, count: int, center=None) -> np.ndarray:
    """Candidate controls for the maximality check."""
    if isinstance(omega, FiniteSet):
        return np.array(omega.points, dtype=float)
    if isinstance(omega, OpenUnitInterval):
        return np.linspace(0.0, 1.0, count + 2)[1:-1, None]
    if isinstance(omega, Box):
        lo, hi = np.array(omega.lo), np.array(omega.hi)
        if len(lo) == 1:
            return np.linspace(lo[0], hi[0], count)[:, None]
        unit = qmc.Halton(d=len(lo), scramble=False).random(count)
        return lo + unit * (hi - lo)
    center = np.asarray(center, dtype=float)
    r = len(center)
    if r == 1:
        return center + np.linspace(-UNCONSTRAINED_SAMPLE_RADIUS, UNCONSTRAINED_SAMPLE_RADIUS, count)[:, None]
    cube = 2.0 * qmc.Halton(d=r, scramble=False).random(count) - 1.0
    ball = cube[np.linalg.norm(cube, axis=1) <= 1.0]
    return center + UNCONSTRAINED_SAMPLE_RADIUS * ball


class GapStats(NamedTuple):
    max: float
    location: Optional[float]
    checked: int


def maximality_gap(p: ControlProblem, e: Extremal, samples: int = 101) -> GapStats:
    """``max_t [ max_v H(x, v, psi0, psi) - H(x, u, psi0, psi) ]`` over sampled ``v``.

    Positive values are violations; true extremals give values near zero.
    """
    _check_span(p, e)
    kern = p.kernel
    H = hamiltonian_values(p, e)
    fixed = None if isinstance(p.omega, Unconstrained) else region_samples(p.omega, samples)
    gaps = np.empty(len(e))
    for k in range(len(e)):
        V = fixed if fixed is not None else region_samples(p.omega, samples, e.u[k])
        m = len(V)
        if m == 0 or p.r == 0:
            gaps[k] = 0.0
            continue
        hv = kern.hamiltonian_many(np.broadcast_to(e.x[k], (m, p.n)), V, e.psi0,
                                   np.broadcast_to(e.psi[k], (m, p.n)))
        gaps[k] = float(np.max(hv)) - H[k]
    k = int(np.argmax(gaps))
    return GapStats(float(gaps[k]), float(e.grid[k]), len(e))


class ConstancyResult(NamedTuple):
    hbar: float
    max_dev: float
    location: float
    passed: bool


def hamiltonian_constancy(p: ControlProblem, e: Extremal, tol: float) -> ConstancyResult:
    """Mean Hamiltonian and its maximal deviation along ``e``.

    Passes iff ``max_dev <= tol * (1 + |hbar|)``.
    """
    H = hamiltonian_values(p, e)
    hbar = float(np.mean(H))
    dev = np.abs(H - hbar)
    k = int(np.argmax(dev))
    return ConstancyResult(hbar, float(dev[k]), float(e.grid[k]), bool(dev[k] <= tol * (1.0 + abs(hbar))))


def verify_extremal(p: ControlProblem, e: Extremal, tol: float = 1e-4, samples: int = 101) -> VerificationReport:
    ctrl = residual_control(p, e)
    adj = residual_adjoint(p, e)
    gap = maximality_gap(p, e, samples)
    const = hamiltonian_constancy(p, e, tol)
    htol = tol * (1.0 + abs(const.hbar))

    def fd_entry(name, st):
        return CheckEntry(name, st.max, st.location, tol, st.max <= tol,
                          {"mean": st.mean, "nodes_checked": st.checked,
                           "switch_nodes": st.switch_nodes, "switch_max": st.switch_max})

    entries = [
        fd_entry("control system", ctrl),
        fd_entry("adjoint system", adj),
        CheckEntry("maximality", gap.max, gap.location, htol, gap.max <= htol,
                   {"samples": samples, "nodes_checked": gap.checked}),
        CheckEntry(THEOREM, const.max_dev, const.location, htol, const.passed, {"hbar": const.hbar}),
    ]
    notes = [f"checked on {len(e)} grid nodes"]
    if ctrl.switch_nodes:
        notes.append(f"{ctrl.switch_nodes} nodes adjacent to control switches excluded from "
                     "finite-difference residual maxima")
    if all(x.passed for x in entries[:3]) and not const.passed:
        notes.append("the extremal conditions hold but the Hamiltonian drifts: numerical drift "
                     "(integrator or sampling error), not a counterexample")
    return VerificationReport(entries, const.hbar, all(x.passed for x in entries), len(e), notes)
