"""Exception hierarchy.

Numerical failures (exit code 3 from the CLI) derive from NumericalError;
configuration problems (exit code 2) derive from ConfigError.
"""


class AtvmcError(Exception):
    pass


class ConfigError(AtvmcError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigurationShapeError(AtvmcError, ValueError):
    pass


class NumericalError(AtvmcError):
    pass


class NumericDomainError(NumericalError):
    def __init__(self, message: str, site: int | None = None):
        self.site = site
        super().__init__(message)


class CapacityError(AtvmcError):
    pass


class SamplerStallError(NumericalError):
    pass


class RankZeroError(NumericalError):
    pass


class StiffnessError(NumericalError):
    pass


class OptimizationStallError(NumericalError):
    pass


class OracleError(NumericalError):
    pass
