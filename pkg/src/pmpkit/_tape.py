"""Opcode table shared by the compiled and pure-Python kernels.

A tape is a postfix program: each instruction is ``(op, arg)``.  ``arg`` is a
constant-pool index for CONST, a 0-based coordinate for X/U, unused otherwise.
"""

CONST, X, U = 0, 1, 2
NEG, SIN, COS, EXP, LOG, SQRT, ABS = 3, 4, 5, 6, 7, 8, 9
ADD, SUB, MUL, DIV, POW = 10, 11, 12, 13, 14

UNARY_OPS = {"neg": NEG, "sin": SIN, "cos": COS, "exp": EXP, "log": LOG, "sqrt": SQRT, "abs": ABS}
BINARY_OPS = {"+": ADD, "-": SUB, "*": MUL, "/": DIV, "^": POW}

# kernel status codes
OK = 0
ERR_LOG = 1
ERR_SQRT = 2
ERR_DIV = 3
ERR_POW = 4
ERR_SQRT_DERIV = 5
ERR_POW_DERIV = 6
ERR_UNBOUNDED = 7
ERR_NONFINITE = 8

MESSAGES = {
    ERR_LOG: "log of non-positive argument",
    ERR_SQRT: "sqrt of negative argument",
    ERR_DIV: "division by zero",
    ERR_POW: "power outside its real domain",
    ERR_SQRT_DERIV: "sqrt is not differentiable at 0",
    ERR_POW_DERIV: "power is not differentiable at this point",
    ERR_UNBOUNDED: "Hamiltonian maximization diverged (|u| > 1e8)",
    ERR_NONFINITE: "non-finite value in the Hamiltonian system",
}

# region kinds understood by the kernels
REGION_UNCONSTRAINED, REGION_BOX, REGION_FINITE = 0, 1, 2

# maximization constants
TIE_TOL = 1e-10
GRID_POINTS = 32
UNCONSTRAINED_RADIUS = 10.0
DIVERGENCE_BOUND = 1e8
ASCENT_ITERATIONS = 500
POLISH_ITERATIONS = 4
FLATNESS_PROBE = 1e-3


def raise_status(status):
    from .errors import DomainError, IntegrationFailure, UnboundedHamiltonian

    if status == OK:
        return
    if status == ERR_UNBOUNDED:
        raise UnboundedHamiltonian(MESSAGES[status])
    if status == ERR_NONFINITE:
        raise IntegrationFailure(MESSAGES[status])
    raise DomainError(MESSAGES.get(status, f"kernel status {status}"))
