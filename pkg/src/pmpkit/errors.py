"""Exception hierarchy shared by every pmpkit module."""


class PmpError(Exception):
    """Base class for pmpkit failures."""


class ExprSyntaxError(SyntaxError, PmpError):
    """Malformed expression text; ``offset`` is the 0-based byte offset."""

    def __init__(self, message, source="", offset=0):
        super().__init__(f"{message} (at offset {offset})")
        self.msg = message
        self.text = source
        self.offset = offset


class UnknownSymbol(ValueError, PmpError):
    def __init__(self, symbol):
        super().__init__(f"unknown symbol {symbol!r}")
        self.symbol = symbol


class DomainError(ArithmeticError, PmpError):
    """Expression evaluated outside the domain of one of its operations."""


class UnboundedHamiltonian(PmpError):
    """Hamiltonian maximization diverged; the problem is ill-posed as modeled."""


class IntegrationFailure(PmpError):
    pass


class NoConvergence(PmpError):
    def __init__(self, message, residual_norm=float("nan"), iterations=0):
        super().__init__(f"{message} (residual norm {residual_norm:.3e} after {iterations} iterations)")
        self.residual_norm = residual_norm
        self.iterations = iterations


class GridMismatch(ValueError, PmpError):
    pass


class HorizonTooShort(ValueError, PmpError):
    pass


class VBarOutOfRange(ValueError, PmpError):
    pass


class UnknownEntry(KeyError, PmpError):
    pass
