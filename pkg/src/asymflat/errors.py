"""Exception hierarchy.

Everything numerical derives from :class:`NumericalFailure` so the CLI can map
it onto a single exit code; configuration problems have their own branch.
"""


class AsymflatError(Exception):
    """Base class for all package errors."""


class NumericalFailure(AsymflatError):
    pass


class DomainError(NumericalFailure, ValueError):
    """Point outside the asymptotic region of a data family."""


class DegenerateMetric(NumericalFailure):
    pass


class NonSpacelikeSlice(NumericalFailure):
    """Graph function too steep: the slice is not spacelike at some point."""


class DifferentiationBudgetExceeded(NumericalFailure):
    pass


class EnergyTooSmall(NumericalFailure):
    pass


class FitFailed(NumericalFailure):
    pass


class NotTimeSymmetric(NumericalFailure):
    pass


class DegenerateSurface(NumericalFailure):
    pass


class NonSpacelikeMeanCurvature(NumericalFailure):
    """H^2 - (tr_Sigma K)^2 <= 0 somewhere on the surface."""


class NewtonDiverged(NumericalFailure):
    pass


class KernelStuck(NumericalFailure):
    """The center (l=1) equation is degenerate, e.g. vanishing energy."""


class EigSolverFailed(NumericalFailure):
    pass


class ConfigError(AsymflatError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ConfigError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
