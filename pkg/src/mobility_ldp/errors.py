"""Exception hierarchy shared by every module."""


class LDPError(Exception):
    """Base class for all package errors."""


class DomainError(LDPError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class ConfigError(LDPError, ValueError):
    """Invalid grid, simulation or scenario configuration."""


class ConvergenceError(LDPError, RuntimeError):
    """The eigensolver stopped before reaching the requested residual."""

    def __init__(self, message, residual=float("nan"), lam=None):
        super().__init__(message)
        self.residual = residual
        self.lam = lam


class RangeError(LDPError, ValueError):
    """A query falls outside the sampled part of a rate curve."""


class UsageError(LDPError, ValueError):
    """Arguments are individually valid but inconsistent with each other."""


class InsufficientDataError(LDPError, RuntimeError):
    """Too few Monte Carlo samples fall in the requested event."""
