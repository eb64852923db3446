"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class ContactKamError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ContactKamError, ValueError):
    """Bad model descriptor, grid, step size or command-line configuration."""


class ModelError(ContactKamError):
    """A Hamiltonian violates a structural assumption (e.g. superlinearity)."""


class StepSizeError(ConfigurationError):
    """The one-step kernel was asked to run with dt * lambda > 1/2."""


class PreconditionError(ContactKamError, ValueError):
    """An operation was called outside its documented domain."""


class BracketError(ContactKamError):
    """A monotone root search could not bracket its target."""

    def __init__(self, message: str, cell: tuple | None = None):
        super().__init__(message)
        self.cell = cell


class BlowUpError(ContactKamError):
    """The contact flow left the admissible region.

    Attributes:
        time: time at which the blow-up was detected.
        orbit: the partial orbit computed up to that time (may be None).
    """

    def __init__(self, message: str, time: float, orbit=None):
        super().__init__(message)
        self.time = time
        self.orbit = orbit


class ConsistencyError(ContactKamError):
    """Internal bookkeeping (e.g. argmin links) is inconsistent."""
