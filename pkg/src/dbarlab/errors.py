"""Exception hierarchy shared by the library and the CLI."""


class DbarLabError(Exception):
    """Base class for all library errors."""


class DomainRangeError(DbarLabError):
    """A point lies outside the region where an evaluator is defined."""


class ConvergenceError(DbarLabError):
    """An iterative solver did not converge.

    The last iterate is kept on the exception for inspection.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DegreeError(DbarLabError):
    """Form degree bookkeeping was violated (e.g. dbar of a top-degree form)."""


class SingularityError(DbarLabError):
    """A kernel was evaluated on its singular set."""


class StencilError(DbarLabError):
    """A finite-difference stencil left the admissible region."""


class UnsupportedInputError(DbarLabError):
    """An input lacks a capability the operation requires."""


class ConfigError(DbarLabError):
    """Invalid configuration or selector."""


class QuadratureError(DbarLabError):
    """Misuse of a quadrature rule or a non-finite integrand value."""


class ConstructionError(DbarLabError):
    """An object failed a validity check during construction."""
