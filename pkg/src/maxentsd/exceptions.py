"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`MaxentError`, so callers can catch the whole family at once. The
CLI maps each class onto an exit code.
"""


class MaxentError(Exception):
    """Base class for package errors."""


class ConfigurationError(MaxentError, ValueError):
    """Invalid support, basis, solver option or config document."""


class InputError(MaxentError, ValueError):
    """Invalid data handed to an operation (empty sample, bad shape, ...)."""


class NumericError(MaxentError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class InfeasibleError(MaxentError):
    """The moment vector cannot be matched by any density on the support."""


class NonConvergenceError(MaxentError):
    """The dual solver hit its iteration cap."""

    def __init__(self, message, grad_norm=float("nan"), iterations=0):
        super().__init__(message)
        self.grad_norm = grad_norm
        self.iterations = iterations


class ConditioningError(MaxentError):
    """A covariance matrix is too close to singular to be inverted."""

    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues
