"""Exception hierarchy shared by every module."""


class LHSISError(Exception):
    """Base class for all package errors."""


class ExpressionError(LHSISError, ValueError):
    """Malformed coefficient expression.

    Attributes:
        position: zero-based character offset where parsing failed.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownIdentifierError(ExpressionError):
    pass


class DomainError(LHSISError, ValueError):
    """A function was evaluated outside the region where it is defined."""


class SingularPointError(DomainError):
    """A phase-space point lies on (or numerically at) a pole of a chart formula."""


class QuadratureError(LHSISError, ArithmeticError):
    pass


class IntegrationError(LHSISError, ArithmeticError):
    """The ODE integrator could not continue.

    Attributes:
        t: time at which the failure occurred.
    """

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t = {t!r})")
        self.t = t


class StepSizeUnderflowError(IntegrationError):
    pass


class DegenerateConfigurationError(LHSISError, ValueError):
    """Particular solutions or constants do not admit a reconstruction."""


class ConfigError(LHSISError, ValueError):
    """Invalid run configuration.

    Attributes:
        path: dotted location of the offending field (may be empty).
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class SingularStateError(IntegrationError, SingularPointError):
    """The integrator reached a state where the right-hand side is undefined."""
