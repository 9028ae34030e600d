"""
Exception types shared by the harmonic detection toolkit.

Validation problems subclass ValueError so callers that only know about
ValueError keep working; solver and search failures subclass RuntimeError and
carry the partial result the caller may still want to use.
"""


class HarmonicsError(Exception):
    """Base class for every error raised by the toolkit."""


class SymmetryViolation(HarmonicsError, ValueError):
    """A frequency collection is not symmetric modulo 2*pi."""


class LengthMismatch(HarmonicsError, ValueError):
    """An input window does not have the length the operation needs."""


class DimensionError(HarmonicsError, ValueError):
    """Window length or basis size is not usable for the requested problem."""


class DomainError(HarmonicsError, ValueError):
    """A probability level or sample size lies outside its admissible range."""


class InsufficientTrials(HarmonicsError, ValueError):
    """Too few Monte Carlo trials to resolve the requested quantile."""


class UnsupportedNuisance(HarmonicsError, ValueError):
    """The requested test is not defined for this nuisance set."""


class MTooSmall(HarmonicsError, ValueError):
    """Polynomial degree budget below the admissible minimum m(d)."""


class NotFeasible(HarmonicsError, ValueError):
    """Input does not satisfy the finite-difference residual bound."""


class ZeroSignal(HarmonicsError, ValueError):
    """A ratio was requested for an identically zero window."""


class NotConverged(HarmonicsError, RuntimeError):
    """Solver stopped before certifying its optimum.

    The best report found so far is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class BisectionFailed(HarmonicsError, RuntimeError):
    """No scale in the search bracket produced reliable rejection."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket
