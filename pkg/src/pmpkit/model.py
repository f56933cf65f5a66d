"""Autonomous optimal control problems, their Pontryagin Hamiltonian, and
candidate extremals.

A problem minimizes or maximizes ``int_a^b L(x, u) dt`` subject to
``x' = phi(x, u)``, ``u(t) in omega`` and coordinate-wise fixed or free
endpoint conditions.  Its Hamiltonian is ``H = psi0 * L + psi . phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Optional, Sequence, Union

import numpy as np

from . import _tape
from .backend import build_kernel
from .errors import GridMismatch
from .expr import Expr, control_degree, parse

# ---------------------------------------------------------------------------
# control regions


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def contains(self, u, tol=0.0) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= np.subtract(self.lo, tol)) and np.all(u <= np.add(self.hi, tol)))


@dataclass(frozen=True)
class FiniteSet:
    points: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(tuple(float(v) for v in p) for p in self.points))

    @property
    def dim(self) -> Optional[int]:
        return len(self.points[0]) if self.points else None

    def diameter(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return max(float(np.linalg.norm(np.subtract(p, q))) for p, q in combinations(self.points, 2))

    def contains(self, u, tol=0.0) -> bool:
        u = np.asarray(u, dtype=float)
        return any(np.max(np.abs(u - np.asarray(p)), initial=0.0) <= tol for p in self.points)


@dataclass(frozen=True)
class Unconstrained:
    dim: Optional[int] = None

    def diameter(self) -> float:
        return math.inf

    def contains(self, u, tol=0.0) -> bool:
        return bool(np.all(np.isfinite(u)))


@dataclass(frozen=True)
class OpenUnitInterval:
    """Scalar controls strictly inside (0, 1)."""

    dim: int = 1

    def diameter(self) -> float:
        return 1.0

    def contains(self, u, tol=0.0) -> bool:
        u = np.asarray(u, dtype=float).reshape(-1)
        return u.shape == (1,) and 0.0 < u[0] < 1.0


ControlRegion = Union[Box, FiniteSet, Unconstrained, OpenUnitInterval]


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class BoundarySpec:
    """Per-coordinate endpoint conditions; ``None`` marks a free coordinate."""

    initial: tuple[Optional[float], ...]
    final: tuple[Optional[float], ...]

    def __post_init__(self):
        fix = lambda vals: tuple(None if v is None else float(v) for v in vals)  # noqa: E731
        object.__setattr__(self, "initial", fix(self.initial))
        object.__setattr__(self, "final", fix(self.final))

    @property
    def fixed_initial(self) -> list[int]:
        return [i for i, v in enumerate(self.initial) if v is not None]

    @property
    def fixed_final(self) -> list[int]:
        return [i for i, v in enumerate(self.final) if v is not None]


# ---------------------------------------------------------------------------
# problem


@dataclass(frozen=True)
class ControlProblem:
    n: int
    r: int
    L: Expr
    phi: tuple[Expr, ...]
    omega: ControlRegion
    a: float
    b: float
    boundary: BoundarySpec
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(self.phi))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @classmethod
    def from_text(cls, L: str, phi: Sequence[str], r: int, omega: ControlRegion, a: float, b: float,
                  initial, final, name: str = "") -> "ControlProblem":
        n = len(phi)
        return cls(
            n=n,
            r=r,
            L=parse(L, n, r),
            phi=tuple(parse(s, n, r) for s in phi),
            omega=omega,
            a=a,
            b=b,
            boundary=BoundarySpec(tuple(initial), tuple(final)),
            name=name,
        )

    def shifted(self, offset: float) -> "ControlProblem":
        """The same problem on ``[a + offset, b + offset]``."""
        from dataclasses import replace

        return replace(self, a=self.a + offset, b=self.b + offset)

    @cached_property
    def control_affine(self) -> bool:
        return all(control_degree(e.tree) in (0, 1) for e in (self.L, *self.phi))

    @cached_property
    def kernel(self):
        omega = self.omega
        trees = [self.L.tree] + [e.tree for e in self.phi]
        if isinstance(omega, Box):
            return build_kernel(self.n, self.r, trees, _tape.REGION_BOX, omega.lo, omega.hi,
                                affine=self.control_affine)
        if isinstance(omega, FiniteSet):
            return build_kernel(self.n, self.r, trees, _tape.REGION_FINITE, points=omega.points)
        return build_kernel(self.n, self.r, trees)


def _vec(v, dim: int, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(v, dtype=np.float64).reshape(-1)
    if arr.shape[0] != dim:
        raise ValueError(f"{what} has length {arr.shape[0]}, expected {dim}")
    return arr


def hamiltonian(p: ControlProblem, x, u, psi0: float, psi) -> float:
    """``psi0 * L(x, u) + sum_i psi_i * phi_i(x, u)``."""
    return p.kernel.hamiltonian(_vec(x, p.n, "x"), _vec(u, p.r, "u"), float(psi0), _vec(psi, p.n, "psi"))


def hamiltonian_partials(p: ControlProblem, x, u, psi0: float, psi) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(dH/dx, dH/dpsi)``; the latter is ``phi(x, u)`` itself."""
    return p.kernel.partials(_vec(x, p.n, "x"), _vec(u, p.r, "u"), float(psi0), _vec(psi, p.n, "psi"))


def dynamics(p: ControlProblem, x, u) -> np.ndarray:
    return hamiltonian_partials(p, x, u, 0.0, np.zeros(p.n))[1]


def validate(p: ControlProblem) -> list[str]:
    """Defects of ``p``; an empty list means the problem is well formed."""
    defects = []
    if not (math.isfinite(p.a) and math.isfinite(p.b)):
        defects.append("non-finite horizon")
    elif not p.a < p.b:
        defects.append("empty horizon")
    if p.n < 1:
        defects.append("state dimension must be positive")
    if p.r < 0:
        defects.append("control dimension must be non-negative")
    if len(p.phi) != p.n:
        defects.append(f"dynamics has {len(p.phi)} components, expected {p.n}")
    for label, e in [("L", p.L)] + [(f"phi{i + 1}", e) for i, e in enumerate(p.phi)]:
        if (e.n, e.r) != (p.n, p.r):
            defects.append(f"{label} declared over (n={e.n}, r={e.r}), expected (n={p.n}, r={p.r})")
    omega = p.omega
    if isinstance(omega, Box):
        if len(omega.lo) != p.r or len(omega.hi) != p.r:
            defects.append("box bounds do not match the control dimension")
        elif any(lo > hi for lo, hi in zip(omega.lo, omega.hi)):
            defects.append("inverted box")
        elif not all(math.isfinite(v) for v in omega.lo + omega.hi):
            defects.append("box bounds must be finite")
    elif isinstance(omega, FiniteSet):
        if not omega.points:
            defects.append("empty finite control set")
        elif any(len(q) != p.r for q in omega.points):
            defects.append("finite control set points do not match the control dimension")
    elif isinstance(omega, OpenUnitInterval):
        if p.r != 1:
            defects.append("open unit interval requires a scalar control")
    elif isinstance(omega, Unconstrained):
        if omega.dim is not None and omega.dim != p.r:
            defects.append("unconstrained region dimension does not match the control dimension")
    else:
        defects.append(f"unknown control region {omega!r}")
    bd = p.boundary
    if len(bd.initial) != p.n or len(bd.final) != p.n:
        defects.append("boundary spec does not match the state dimension")
    elif not bd.fixed_initial:
        defects.append("no state coordinate fixed at t=a")
    return defects


# ---------------------------------------------------------------------------
# extremals


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Extremal:
    """Candidate Pontryagin quadruple ``(x, u, psi0, psi)`` sampled on ``grid``."""

    grid: np.ndarray
    x: np.ndarray
    u: np.ndarray
    psi0: float
    psi: np.ndarray
    singular: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = _frozen(self.grid).reshape(-1)
        N1 = grid.shape[0]
        x = _frozen(self.x).reshape(N1, -1)
        psi = _frozen(self.psi).reshape(N1, -1)
        u = _frozen(self.u).reshape(N1, -1) if np.size(self.u) else _frozen(np.zeros((N1, 0)))
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "psi0", float(self.psi0))
        if self.singular is not None:
            s = np.array(self.singular, dtype=bool).reshape(-1)
            s.setflags(write=False)
            object.__setattr__(self, "singular", s)
        if N1 < 2 or not np.all(np.diff(grid) > 0):
            raise GridMismatch("extremal grid must be strictly increasing with at least two nodes")
        if x.shape != psi.shape:
            raise ValueError("state and costate samples differ in shape")
        if not self.psi0 <= 0.0:
            raise ValueError("psi0 must be non-positive")
        scale = np.abs(self.psi0) + np.max(np.abs(psi), axis=1)
        if np.any(scale <= 1e-12):
            raise ValueError("multipliers (psi0, psi) vanish at some grid node")

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def r(self) -> int:
        return self.u.shape[1]

    def __len__(self):
        return self.grid.shape[0]


def hamiltonian_values(p: ControlProblem, e: Extremal) -> np.ndarray:
    k = p.kernel
    return np.array([k.hamiltonian(e.x[i], e.u[i], e.psi0, e.psi[i]) for i in range(len(e))])


def cost(p: ControlProblem, traj: Extremal) -> float:
    """Trapezoidal approximation of the performance index along ``traj``."""
    _check_span(p, traj)
    k = p.kernel
    vals = np.array([k.value(0, traj.x[i], traj.u[i]) for i in range(len(traj))])
    return float(np.trapezoid(vals, traj.grid))


def _check_span(p: ControlProblem, e: Extremal):
    tol = 1e-12 * (1.0 + abs(p.a) + abs(p.b))
    if abs(e.grid[0] - p.a) > tol or abs(e.grid[-1] - p.b) > tol:
        raise GridMismatch(f"grid spans [{e.grid[0]}, {e.grid[-1]}], problem horizon is [{p.a}, {p.b}]")
    if e.x.shape[1] != p.n or e.u.shape[1] != p.r:
        raise GridMismatch("extremal dimensions do not match the problem")
