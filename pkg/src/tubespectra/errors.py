"""Exception hierarchy for the toolkit.

Every error raised by the package derives from :class:`TubeSpectraError`,
so callers can catch the whole family with one clause.  Subclasses carry
enough context (offending coordinate, residual, field name) to diagnose a
failure without re-running the computation.
"""


class TubeSpectraError(Exception):
    """Base class for all toolkit errors."""


class InputError(TubeSpectraError):
    """Invalid argument: wrong shape, non-orthonormal frame, bad range."""


class IntegrationError(TubeSpectraError):
    """ODE integration failed; carries the arclength where it happened."""

    def __init__(self, message, s=None):
        super().__init__(message)
        self.s = s


class ResolutionError(TubeSpectraError):
    """Sampling or grid too coarse for the requested operation."""


class EllipticityError(TubeSpectraError):
    """Metric coefficient violates its positivity bound.

    ``where`` holds the offending (s, u) point or the offending product
    a*sup|kappa1| for the whole-tube check.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class CoverageError(TubeSpectraError):
    """A ladder or threshold list is too short to answer the question."""


class SolverError(TubeSpectraError):
    """Eigenvalue solver did not converge; carries the best residual."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class DiagnosticsError(TubeSpectraError):
    """Convergence ladder behaved unexpectedly; carries the raw ladder."""

    def __init__(self, message, ladder=None):
        super().__init__(message)
        self.ladder = ladder


class WindowError(TubeSpectraError):
    """An energy window is empty or invalid for a projected estimate."""


class ConfigError(TubeSpectraError):
    """Configuration file is malformed; message names section and field."""
