"""Exception hierarchy shared by every module."""


class MacrorealError(Exception):
    """Base class for all package errors."""


class DomainError(MacrorealError, ValueError):
    """An input lies outside the domain of an operation."""


class DegenerateInputError(DomainError):
    """A closed form would divide by (numerically) zero."""


class ConfigError(DomainError):
    """Bad run configuration or command-line usage."""


class InvariantError(MacrorealError, RuntimeError):
    """An internal numerical invariant was breached."""
