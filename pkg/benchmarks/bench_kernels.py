"""Compiled vs pure-Python kernel timings on the hot loops.

    python benchmarks/bench_kernels.py [--repeat 3] [--steps 1000]

Both kernels are built from the same tapes, so every row also checks that the
two backends return identical arrays.
"""

import argparse
import time

import numpy as np

from pmpkit import _tape, catalog
from pmpkit.backend import CompiledKernel, PythonKernel, build_kernel
from pmpkit.expr import parse


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def kernels(n, r, texts, **kw):
    trees = [parse(t, n, r).tree for t in texts]
    return {cls.backend: build_kernel(n, r, trees, kernel_cls=cls, **kw) for cls in (PythonKernel, CompiledKernel)}


def cases(steps, batch):
    rng = np.random.default_rng(0)
    coth1 = 1 / np.tanh(1.0)

    lqr = kernels(1, 1, ["(x1^2 + u1^2)/2", "u1"])
    yield "rk4 lqr (unconstrained ascent)", lqr, lambda k: k.rk4(np.array([1.0]), np.array([-coth1]), -1.0, 0.0, 1.0, steps)

    bang = kernels(1, 1, ["x1", "u1"], region_kind=_tape.REGION_BOX, lo=(-1,), hi=(1,), affine=True)
    yield "rk4 bang (sign rule)", bang, lambda k: k.rk4(np.zeros(1), np.array([-0.5]), -1.0, 0.0, 1.0, steps)

    nl = kernels(2, 1, ["x1^2 + cos(x2)*u1^2 + 0.1*u1^4", "x2", "sin(x1) + u1"],
                 region_kind=_tape.REGION_BOX, lo=(-2,), hi=(2,))
    yield "rk4 nonlinear box (grid + golden)", nl, lambda k: k.rk4(np.array([0.1, 0.0]), np.array([0.2, -0.1]), -1.0,
                                                                    0.0, 1.0, steps // 4)

    X, U, P = rng.normal(size=(batch, 2)), rng.normal(size=(batch, 1)), rng.normal(size=(batch, 2))
    yield f"hamiltonian_many x{batch}", nl, lambda k: k.hamiltonian_many(X, U, -1.0, P)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--batch", type=int, default=20000)
    args = ap.parse_args()
    if CompiledKernel is None:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation` first")

    print(f"{'case':36s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s}  identical")
    for label, ks, fn in cases(args.steps, args.batch):
        tp, op = best_of(lambda: fn(ks["python"]), args.repeat)
        tc, oc = best_of(lambda: fn(ks["compiled"]), args.repeat)
        same = all(np.array_equal(a, b) for a, b in zip(op, oc)) if isinstance(op, tuple) else np.array_equal(op, oc)
        print(f"{label:36s} {tp:11.4f} {tc:13.5f} {tp / tc:8.1f}  {same}")

    p = catalog.get("lqr-scalar").problem
    from pmpkit.numerics import shoot

    t, _ = best_of(lambda: shoot(p, -1.0, [-1.0]), args.repeat)
    print(f"\nshoot lqr-scalar end to end with the default backend: {t:.3f} s")


if __name__ == "__main__":
    main()
