"""Exception hierarchy.

Each class maps onto one CLI exit code: configuration problems exit with 2,
data problems with 3 and numerical failures with 4.
"""


class CensoredSmithError(Exception):
    exit_code = 1


class ConfigError(CensoredSmithError, ValueError):
    exit_code = 2


class DataError(CensoredSmithError, ValueError):
    exit_code = 3


class ParameterDomainError(DataError):
    """Distribution parameters outside their domain (e.g. sigma <= 0)."""


class TransformDomainError(DataError):
    """Value at or outside the support of the margin being transformed."""


class CensoringError(DataError):
    """Observation below the censoring threshold."""


class NumericalError(CensoredSmithError, ArithmeticError):
    exit_code = 4


class NonIdentifiableError(NumericalError):
    """Not enough uncensored observations to estimate the margin."""


class ResolutionError(NumericalError):
    """Storm simulation hit its point cap before the stopping rule held."""


class InsufficientSimulationError(NumericalError):
    """The simulated record contains fewer clusters than the return period needs."""
