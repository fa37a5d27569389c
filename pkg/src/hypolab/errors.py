"""Exception types shared across the package."""


class HypolabError(Exception):
    """Base class for all package errors."""


class DomainError(HypolabError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class AccuracyError(HypolabError, ArithmeticError):
    """A series or quadrature could not reach the requested accuracy."""


class ConventionError(HypolabError, ValueError):
    """Curvature constants were used under an incompatible normalization."""


class UnsupportedError(HypolabError, TypeError):
    """The requested model/input class is not handled."""


class InfeasibleError(HypolabError, ValueError):
    """No admissible constant exists; carries a witnessing point."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class SolverError(HypolabError, RuntimeError):
    """A time stepper became unstable or lost monotonicity."""
