"""Exception types shared across the package."""


class DpwError(Exception):
    """Base class for all package errors."""


class NumericalFailure(DpwError):
    """Base class for runtime numerical failures (CLI exit code 2)."""


class SingularOnCircle(NumericalFailure):
    """A loop matrix is numerically singular at a circle sample."""


class ZeroC(DpwError):
    """The potential constant c must be nonzero."""


class SingularGauge(NumericalFailure):
    """A gauge loop is numerically singular at an evaluation point."""


class BranchPointHit(NumericalFailure):
    """Omega = 1 + lambda^2/(4c) vanished on the working lambda set."""


class StepUnderflow(NumericalFailure):
    """The adaptive step controller drove the step below its floor."""


class OverflowOfLogPower(DpwError):
    """A log-series product exceeded the configured maximum log power."""


class NotPositive(NumericalFailure):
    """A sample of the symbol to be factorized is not positive definite."""


class CellBoundary(NumericalFailure):
    """An indefinite factorization pivot is too close to zero to classify."""


class NotInBigCell(NumericalFailure):
    """Pivot signs show the loop is outside the top open cell."""


class NotUnitary(DpwError):
    """A frame expected to be unitary at lambda0 is not."""


class Singular(DpwError):
    """A matrix expected to be invertible is singular."""


class DegenerateMetric(NumericalFailure):
    """The induced metric determinant vanished at a curvature stencil."""


class ConfigError(DpwError):
    """Bad or unknown configuration input (CLI exit code 3)."""


class RankDeficiencyWarning(UserWarning):
    """Numerical rank of the isotropy system is ambiguous near the cutoff."""
