"""Exception types shared across the library."""


class RemotadError(Exception):
    """Base class for library-specific failures."""


class DimensionError(RemotadError, ValueError):
    """Array shapes are inconsistent with the requested operation."""


class DomainError(RemotadError, ValueError):
    """An argument lies outside the mathematically valid domain."""


class ContractViolation(RemotadError, ValueError):
    """An input violates a structural precondition (e.g. non-symmetric matrix)."""


class DegenerateParameterError(RemotadError, ValueError):
    """Tail-approximation moments are degenerate (h0 <= 0 or zero first moment)."""


class UnsupportedAnalyticError(RemotadError):
    """Closed-form probabilities are unavailable for this scheme; use Monte Carlo."""


class TrainingDivergedError(RemotadError, RuntimeError):
    """Model training produced a non-finite loss."""


class ConfigError(RemotadError, ValueError):
    """Invalid experiment configuration or config file."""
