"""Exception hierarchy shared across the package.

ValidationError covers bad inputs and malformed files (CLI exit code 1),
OSError covers file-system failures (exit code 2), and ComputationError
covers numerical failures such as rank-deficient fits (exit code 3).
"""


class ValidationError(ValueError):
    """Input data or configuration violates a documented precondition."""


class ConfigurationError(ValidationError):
    """A configuration value is internally inconsistent or out of range."""


class FrameRejected(ValidationError):
    """A teleoperation frame was refused; pipeline state is unchanged."""


class ComputationError(RuntimeError):
    """A numerical operation could not produce a valid result."""


class FitError(ComputationError):
    """Least-squares fitting failed (rank-deficient or ill-conditioned)."""


class InversionError(ComputationError):
    """The 2x2 MCP block is singular or nearly singular."""


class SplitError(ComputationError):
    """The curl motor value cannot be split back into joint angles."""
