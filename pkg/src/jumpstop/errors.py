"""Exception hierarchy.

The distinct classes matter to the command-line harness, which maps
configuration problems and runtime invariant violations to different
exit codes.
"""


class JumpstopError(Exception):
    """Base class for all library errors."""


class ParameterError(JumpstopError, ValueError):
    """A model/payoff/grid parameter is outside its admissible range."""


class DomainError(JumpstopError, ValueError):
    """A function was evaluated at a point where it is not defined."""


class UnsupportedOperation(JumpstopError):
    """The requested quantity does not exist for this model class."""


class ConfigError(JumpstopError):
    """A run configuration is inconsistent or fails a stability check."""


class NumericalError(JumpstopError):
    """A numerical routine failed to reach its accuracy target."""


class InvariantViolation(JumpstopError):
    """A runtime solution invariant was violated."""
