"""Kernel backend selection.

The compiled kernel is used when importable; set ``PMPKIT_BACKEND=python`` to
force the pure-Python fallback.
"""

import os

import numpy as np

from . import _tape
from . import _pykernel

PythonKernel = _pykernel.Kernel

try:
    from ._ckernel import Kernel as CompiledKernel
except ImportError:  # extension not built
    CompiledKernel = None

if os.environ.get("PMPKIT_BACKEND", "").lower() == "python" or CompiledKernel is None:
    Kernel = PythonKernel
else:
    Kernel = CompiledKernel

BACKEND = Kernel.backend


def available_backends():
    return {"python": PythonKernel, **({"compiled": CompiledKernel} if CompiledKernel else {})}


def build_kernel(n, r, trees, region_kind=_tape.REGION_UNCONSTRAINED, lo=(), hi=(), points=(),
                 affine=False, kernel_cls=None):
    """Compile expression trees (tape 0 = running cost, 1..n = dynamics) into a kernel."""
    from .expr import compile_tape, stack_depth

    pool: list[float] = []
    ops, args, starts = [], [], [0]
    depth = 1
    for tree in trees:
        code = compile_tape(tree, pool)
        depth = max(depth, stack_depth(code))
        for op, arg in code:
            ops.append(op)
            args.append(arg)
        starts.append(len(ops))
    cls = kernel_cls or Kernel
    return cls(
        n, r,
        np.asarray(ops, dtype=np.int32),
        np.asarray(args, dtype=np.int32),
        np.asarray(starts, dtype=np.int32),
        np.asarray(pool, dtype=np.float64),
        depth,
        region_kind,
        np.asarray(lo, dtype=np.float64).reshape(-1),
        np.asarray(hi, dtype=np.float64).reshape(-1),
        np.asarray(points, dtype=np.float64).reshape(-1),
        affine,
    )
