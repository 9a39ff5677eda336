"""Shared exception types for the pmflow package."""


class PMFlowError(Exception):
    """Base class for all package-specific errors."""


class DomainError(PMFlowError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class VacuumError(DomainError):
    """The Bernoulli density argument reached the vacuum boundary.

    Raised when 1 + (gamma-1)*(B - |Dphi|^2/2 - phi) <= 0 for gamma > 1,
    which signals an inadmissible (cavitating) state.
    """


class SingularDirectionError(DomainError):
    """A jump direction is undefined because the velocity jump vanishes."""


class DegenerateGraphError(PMFlowError):
    """The shock graph vanished at an interior node of the square."""


class NumericalError(PMFlowError):
    """A root bracketing or iteration failed; carries diagnostics."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConfigurationError(PMFlowError, ValueError):
    """A configuration value violates a validated constraint."""
