"""Exception types shared across the package."""


class TsodLqrError(Exception):
    """Base class for package-specific errors."""


class DimensionMismatch(TsodLqrError, ValueError):
    """Operands have incompatible shapes."""


class NonStabilizable(TsodLqrError):
    """Riccati iteration diverged or failed to converge; the parameter is
    treated as lying outside the stabilizable set."""


class UnstableRollout(TsodLqrError):
    """A simulated trajectory exceeded the configured state-norm ceiling."""


class SingularPrecision(TsodLqrError):
    """A precision matrix that must be positive definite is not."""


class DomainError(TsodLqrError, ValueError):
    """A scalar argument lies outside its valid domain."""


class ConfigError(TsodLqrError):
    """Experiment configuration failed validation."""


class UsageError(TsodLqrError):
    """Malformed command line invocation."""
