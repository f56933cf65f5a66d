"""Command-line front end.

    pmpkit solve problem.json --guess g1,..,gn --out traj.csv
    pmpkit verify problem.json traj.csv [--tol 1e-4]
    pmpkit augment-check problem.json traj.csv --vbar 0.5 [--alpha 0]
    pmpkit catalog list | show NAME | export NAME out.json

Exit codes: 0 success or pass, 1 usage/parse/solver failure, 2 verification failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Optional

import numpy as np

from . import catalog
from .augment import augment, lift, verify_lift
from .errors import PmpError
from .model import (
    Box,
    ControlProblem,
    Extremal,
    FiniteSet,
    OpenUnitInterval,
    Unconstrained,
    hamiltonian_values,
    validate,
)
from .numerics import IntegratorConfig, ShootingConfig, shoot
from .verify import verify_extremal

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2

DEFAULT_PSI0 = -1.0
DEFAULT_TOL = 1e-4
DEFAULT_SAMPLES = 101
DEFAULT_LIFT_TOL = 1e-6
DEFAULT_VBAR = 0.5
DEFAULT_ALPHA = 0.0

_ICFG = IntegratorConfig()
_SCFG = ShootingConfig()

# keys of the optional "solver" block and where they land
SOLVER_KEYS = {
    "psi0": None,
    "guess": None,
    "method": "integrator",
    "h": "integrator",
    "atol": "integrator",
    "rtol": "integrator",
    "max_steps": "integrator",
    "max_iter": "shooting",
    "tol": "shooting",
    "fd_scale": "shooting",
    "damping": "shooting",
}


class ProblemFileError(ValueError, PmpError):
    pass


# ---------------------------------------------------------------------------
# problem files


def _omega_from_json(spec, r: int):
    if not isinstance(spec, dict) or "type" not in spec:
        raise ProblemFileError("omega must be an object with a 'type' key")
    kind = spec["type"]
    params = spec.get("params", {})
    if kind == "unconstrained":
        return Unconstrained()
    if kind == "box":
        return Box(tuple(params["lo"]), tuple(params["hi"]))
    if kind == "finite":
        return FiniteSet(tuple(tuple(p) for p in params["points"]))
    if kind == "open_unit_interval":
        return OpenUnitInterval()
    raise ProblemFileError(f"unknown omega type {kind!r}")


def _omega_to_json(omega) -> dict:
    if isinstance(omega, Box):
        return {"type": "box", "params": {"lo": list(omega.lo), "hi": list(omega.hi)}}
    if isinstance(omega, FiniteSet):
        return {"type": "finite", "params": {"points": [list(p) for p in omega.points]}}
    if isinstance(omega, OpenUnitInterval):
        return {"type": "open_unit_interval", "params": {}}
    return {"type": "unconstrained", "params": {}}


def problem_from_json(doc: dict) -> tuple[ControlProblem, dict]:
    """Build a validated problem and its solver overrides from a parsed document."""
    try:
        n, r = int(doc["n"]), int(doc["r"])
        phi = doc["phi"]
        if not isinstance(phi, list) or len(phi) != n:
            raise ProblemFileError(f"phi must be a list of {n} expressions")
        bd = doc["boundary"]
        p = ControlProblem.from_text(
            doc["L"], phi, r, _omega_from_json(doc["omega"], r),
            float(doc["horizon"]["a"]), float(doc["horizon"]["b"]),
            bd["initial"], bd["final"], name=doc.get("name", ""),
        )
    except KeyError as exc:
        raise ProblemFileError(f"problem file lacks key {exc}") from None
    except (TypeError, AttributeError) as exc:
        raise ProblemFileError(f"malformed problem file: {exc}") from None
    defects = validate(p)
    if defects:
        raise ProblemFileError("invalid problem: " + "; ".join(defects))
    solver = dict(doc.get("solver") or {})
    unknown = set(solver) - set(SOLVER_KEYS)
    if unknown:
        raise ProblemFileError(f"unknown solver overrides: {sorted(unknown)}")
    return p, solver


def problem_to_json(p: ControlProblem, solver: Optional[dict] = None) -> dict:
    doc = {
        "name": p.name,
        "n": p.n,
        "r": p.r,
        "L": p.L.source or p.L.unparse(),
        "phi": [e.source or e.unparse() for e in p.phi],
        "omega": _omega_to_json(p.omega),
        "horizon": {"a": p.a, "b": p.b},
        "boundary": {"initial": list(p.boundary.initial), "final": list(p.boundary.final)},
    }
    if solver:
        doc["solver"] = solver
    return doc


def load_problem(path: str) -> tuple[ControlProblem, dict]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ProblemFileError(f"cannot read problem file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: invalid JSON ({exc})") from None
    return problem_from_json(doc)


def export_entry(name: str) -> dict:
    ent = catalog.get(name)
    solver = {"psi0": ent.psi0, "guess": list(ent.default_guess), **ent.solver}
    return problem_to_json(ent.problem, solver)


# ---------------------------------------------------------------------------
# trajectory files


def trajectory_header(n: int, r: int) -> list[str]:
    return (["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(r)]
            + [f"psi{i + 1}" for i in range(n)] + ["H"])


def write_trajectory(path: str, p: ControlProblem, e: Extremal, H=None):
    H = hamiltonian_values(p, e) if H is None else H
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(p.n, p.r))
        for k in range(len(e)):
            row = [e.grid[k], *e.x[k], *e.u[k], *e.psi[k], H[k]]
            w.writerow(["%.17g" % v for v in row])


def read_trajectory(path: str, p: ControlProblem, psi0: float) -> Extremal:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ProblemFileError(f"cannot read trajectory file {path}: {exc.strerror}") from None
    expected = trajectory_header(p.n, p.r)
    if not rows or [c.strip() for c in rows[0]] != expected:
        raise ProblemFileError(f"{path}: header must be {','.join(expected)}")
    try:
        data = np.array([[float(c) for c in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise ProblemFileError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != len(expected):
        raise ProblemFileError(f"{path}: need at least two rows of {len(expected)} columns")
    n, r = p.n, p.r
    try:
        return Extremal(data[:, 0], data[:, 1:1 + n], data[:, 1 + n:1 + n + r], psi0,
                        data[:, 1 + n + r:1 + 2 * n + r])
    except ValueError as exc:
        raise ProblemFileError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# commands


def _pick(cli_value, overrides: dict, key: str, default):
    if cli_value is not None:
        return cli_value
    return overrides.get(key, default)


def _configs(args, overrides: dict) -> tuple[IntegratorConfig, ShootingConfig]:
    ikw, skw = {}, {}
    for key, where in SOLVER_KEYS.items():
        if where is None:
            continue
        target = ikw if where == "integrator" else skw
        default = getattr(_ICFG if where == "integrator" else _SCFG, key)
        target[key] = _pick(getattr(args, key, None), overrides, key, default)
    return IntegratorConfig(**ikw), ShootingConfig(**skw)


def _emit(doc: dict):
    json.dump(doc, sys.stdout, indent=2, allow_nan=False)
    sys.stdout.write("\n")


def cmd_solve(args) -> int:
    p, overrides = load_problem(args.problem)
    psi0 = float(_pick(args.psi0, overrides, "psi0", DEFAULT_PSI0))
    guess = args.guess if args.guess is not None else overrides.get("guess")
    if guess is None:
        raise ProblemFileError("no initial guess: pass --guess or set solver.guess in the problem file")
    icfg, scfg = _configs(args, overrides)
    e = shoot(p, psi0, np.asarray(guess, dtype=float), scfg, icfg)
    H = hamiltonian_values(p, e)
    hbar = float(np.mean(H))
    write_trajectory(args.out, p, e, H)
    print(f"converged in {e.info['iterations']} iterations, residual {e.info['residual_norm']:.3e}")
    print(f"psi(a) = {', '.join('%.12g' % v for v in e.info['psi_a'])}")
    print(f"hbar = {hbar:.12g}")
    print(f"max_dev = {float(np.max(np.abs(H - hbar))):.3e}")
    print(f"wrote {len(e)} nodes to {args.out}")
    return EXIT_OK


def _report_doc(command: str, args, report, parameters: dict) -> dict:
    doc = {"command": command, "problem": args.problem, "trajectory": args.trajectory,
           "parameters": parameters}
    doc.update(report.to_dict())
    return doc


def cmd_verify(args) -> int:
    p, overrides = load_problem(args.problem)
    psi0 = float(_pick(args.psi0, overrides, "psi0", DEFAULT_PSI0))
    e = read_trajectory(args.trajectory, p, psi0)
    report = verify_extremal(p, e, args.tol, args.samples)
    _emit(_report_doc("verify", args, report, {"tol": args.tol, "samples": args.samples, "psi0": psi0}))
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_augment_check(args) -> int:
    p, overrides = load_problem(args.problem)
    psi0 = float(_pick(args.psi0, overrides, "psi0", DEFAULT_PSI0))
    e = read_trajectory(args.trajectory, p, psi0)
    le = lift(p, e, args.vbar, args.alpha)
    ap = augment(p, le.alpha, le.beta)
    report = verify_lift(ap, le, args.tol)
    params = {"vbar": args.vbar, "alpha": args.alpha, "beta": le.beta, "tol": args.tol, "psi0": psi0,
              "s_boundary": list(ap.s_boundary)}
    _emit(_report_doc("augment-check", args, report, params))
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_catalog(args) -> int:
    if args.action == "list":
        for name, desc in catalog.list_entries():
            print(f"{name:18s} {desc}")
        return EXIT_OK
    if args.name is None:
        raise ProblemFileError(f"catalog {args.action} requires an entry name")
    if args.action == "show":
        ent = catalog.get(args.name)
        doc = {
            "description": ent.description,
            "problem": export_entry(args.name),
            "reference": {"psi_a_star": list(ent.psi_a_star), "hbar_star": ent.hbar_star,
                          "cost_star": ent.cost_star, "switch_times": list(ent.switch_times)},
            "note": ent.note,
        }
        _emit(doc)
        return EXIT_OK
    if args.out is None:
        raise ProblemFileError("catalog export requires an output path")
    with open(args.out, "w") as fh:
        json.dump(export_entry(args.name), fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.name} to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _vector(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected finite numbers, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pmpkit", description="Pontryagin extremals: solve, verify, augment-check.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="shoot on the initial costate and write a trajectory CSV",
                       description="Values in the problem file's 'solver' block override the "
                                   "defaults shown; command-line flags override both.")
    s.add_argument("problem")
    s.add_argument("--psi0", type=float, help=f"cost multiplier (default {DEFAULT_PSI0})")
    s.add_argument("--guess", type=_vector, help="initial unknowns g1,..,gn")
    s.add_argument("--out", required=True, help="trajectory CSV path")
    s.add_argument("--method", choices=("rk4", "rk45"), help=f"integrator (default {_ICFG.method})")
    s.add_argument("--h", type=float, help=f"RK4 step or initial RK45 step (default {_ICFG.h:g})")
    s.add_argument("--atol", type=float, help=f"RK45 absolute tolerance (default {_ICFG.atol:g})")
    s.add_argument("--rtol", type=float, help=f"RK45 relative tolerance (default {_ICFG.rtol:g})")
    s.add_argument("--max-steps", dest="max_steps", type=int, help=f"step budget (default {_ICFG.max_steps})")
    s.add_argument("--max-iter", dest="max_iter", type=int, help=f"Newton iterations (default {_SCFG.max_iter})")
    s.add_argument("--tol", type=float, help=f"endpoint residual tolerance (default {_SCFG.tol:g})")
    s.add_argument("--fd-scale", dest="fd_scale", type=float,
                   help=f"relative Jacobian step (default {_SCFG.fd_scale:.3g})")
    s.add_argument("--damping", type=float, help=f"initial Newton step length (default {_SCFG.damping:g})")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a trajectory against the extremal conditions")
    v.add_argument("problem")
    v.add_argument("trajectory")
    v.add_argument("--tol", type=float, default=DEFAULT_TOL, help="residual tolerance (default %(default)g)")
    v.add_argument("--samples", type=int, default=DEFAULT_SAMPLES,
                   help="control samples for maximality (default %(default)d)")
    v.add_argument("--psi0", type=float, help=f"cost multiplier (default: problem file, else {DEFAULT_PSI0})")
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("augment-check", help="lift a trajectory into the time-augmented problem and check it")
    a.add_argument("problem")
    a.add_argument("trajectory")
    a.add_argument("--vbar", type=float, default=DEFAULT_VBAR, help="constant s' in (0, 1) (default %(default)g)")
    a.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="start of the tau interval (default %(default)g)")
    a.add_argument("--tol", type=float, default=DEFAULT_LIFT_TOL, help="residual tolerance (default %(default)g)")
    a.add_argument("--psi0", type=float, help=f"cost multiplier (default: problem file, else {DEFAULT_PSI0})")
    a.set_defaults(func=cmd_augment_check)

    c = sub.add_parser("catalog", help="list, show or export built-in problems")
    c.add_argument("action", choices=("list", "show", "export"))
    c.add_argument("name", nargs="?")
    c.add_argument("out", nargs="?")
    c.set_defaults(func=cmd_catalog)
    return parser


def _join_vector_flags(argv: list[str]) -> list[str]:
    # "--guess -1,-2" would otherwise be read as an unknown option
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--guess" and i + 1 < len(argv):
            out.append(f"--guess={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: Optional[list[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_vector_flags(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (PmpError, ValueError, OSError) as exc:
        print(f"pmpkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
