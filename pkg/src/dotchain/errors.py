"""Exception hierarchy shared by the simulation modules and the CLI."""


class DotChainError(Exception):
    """Base class for all errors raised by dotchain."""


class ParameterError(DotChainError, ValueError):
    """Invalid device parameters, detunings or protocol settings."""


class SingularDenominatorError(DotChainError, ZeroDivisionError):
    """A perturbative energy denominator is (numerically) zero."""


class NonConvergenceError(DotChainError, RuntimeError):
    """An iterative numerical procedure did not reach its tolerance."""


class TransferFailedError(DotChainError, RuntimeError):
    """A chain step left too little weight in the logical subspace."""


class ConfigError(DotChainError):
    """Malformed or inconsistent run configuration file."""
