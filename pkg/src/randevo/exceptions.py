"""Exception hierarchy.

Every error carries enough context (row, entry, mode index) to locate the
offending input without re-running with a debugger.
"""


class RandevoError(Exception):
    """Base class for all package errors."""


class ModelValidationError(RandevoError, ValueError):
    """Chain model failed validation."""


class RowSumError(ModelValidationError):
    def __init__(self, row, total):
        self.row = row
        self.total = total
        super().__init__(f"row {row} of Q sums to {total:.3e}, expected 0")


class NegativeIntensityError(ModelValidationError):
    def __init__(self, row, col, value):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"off-diagonal intensity Q[{row}, {col}] = {value} is negative")


class ReducibleChainError(ModelValidationError):
    def __init__(self, n_classes, unreachable=None):
        self.n_classes = n_classes
        self.unreachable = unreachable
        msg = f"generator is reducible ({n_classes} communicating classes)"
        if unreachable is not None:
            msg += f"; state {unreachable} cannot reach every other state"
        super().__init__(msg)


class DefectiveGeneratorError(ModelValidationError):
    """Q is not numerically diagonalizable."""


class BalanceViolationError(ModelValidationError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"balance condition violated: stationary mean velocity = {residual}")


class NonPositiveDiffusionError(ModelValidationError):
    def __init__(self, eigenvalues):
        self.eigenvalues = eigenvalues
        super().__init__(f"diffusion tensor is not positive definite (eigenvalues {eigenvalues})")


class SingularSystemError(RandevoError, ArithmeticError):
    """A linear system was numerically singular."""


class ShapeError(RandevoError, ValueError):
    """Array has the wrong shape for the mode grid."""


class NonDecayingError(RandevoError, ArithmeticError):
    """An exponential-polynomial that must decay carries a non-decaying term."""


class MissingInitialConditionError(RandevoError, LookupError):
    """A regular term was requested before the data it depends on."""


class InvalidHorizonError(RandevoError, ValueError):
    """Simulation horizon must be strictly positive."""


class UnknownModelError(RandevoError, KeyError):
    """No built-in model with the requested name."""

    def __init__(self, name):
        self.name = name
        super().__init__(name)

    def __str__(self):
        return f"unknown model {self.name!r}; try two_state_telegraph, cyclic(n) or uniform(n)"


class ConfigError(RandevoError, ValueError):
    """Malformed run configuration."""
