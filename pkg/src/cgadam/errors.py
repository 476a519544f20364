"""Exception types shared across the package."""


class CgadamError(Exception):
    """Base class for package errors."""


class ConfigurationError(CgadamError):
    """Invalid hyperparameters, dimensions, or run configuration."""


class NonFiniteError(CgadamError):
    """A gradient or an update produced NaN/Inf; the run must abort."""


class ContractViolationError(CgadamError):
    """A stated oracle contract (e.g. a gradient-norm bound) cannot hold."""
