"""Exception types shared across the package."""


class AssociationError(Exception):
    """Base class for all errors raised by bpassoc."""


class WeightError(AssociationError, ValueError):
    """Invalid weight matrix entry. ``position`` is the 1-based (row, col)."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class NegativeWeight(WeightError):
    pass


class NonFiniteWeight(WeightError):
    pass


class DimensionMismatch(WeightError):
    pass


class InconsistentEvent(AssociationError, ValueError):
    pass


class BudgetExceeded(AssociationError, RuntimeError):
    pass


class DomainError(AssociationError, ValueError):
    pass


class MismatchedZeroPattern(AssociationError, ValueError):
    pass


class ShapeMismatch(AssociationError, ValueError):
    pass


class NotContracting(AssociationError, ArithmeticError):
    pass


class IterationCap(AssociationError, RuntimeError):
    def __init__(self, message, iterations=None, message_delta=None):
        super().__init__(message)
        self.iterations = iterations
        self.message_delta = message_delta


class DepthBudget(AssociationError, RuntimeError):
    pass


class SingularInnovation(AssociationError, ArithmeticError):
    pass


class NumericalError(AssociationError, ArithmeticError):
    pass


class ParseError(AssociationError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(AssociationError, ValueError):
    pass
