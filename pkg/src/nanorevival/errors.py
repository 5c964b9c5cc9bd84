"""Exception hierarchy.  The CLI maps these onto process exit codes."""


class NanorevivalError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class ValidationError(NanorevivalError, ValueError):
    """Invalid user input (parameters, configs, preset names)."""

    exit_code = 2


class TruncationError(NanorevivalError):
    """The angular-momentum basis cannot hold the requested thermal state.

    ``tail`` carries the achieved estimate of the neglected population.
    """

    def __init__(self, message, tail, j_max):
        super().__init__(message)
        self.tail = tail
        self.j_max = j_max


class ConvergenceError(NanorevivalError):
    """An iterative numerical procedure did not converge."""


class MemoryCapError(NanorevivalError):
    """A computation would exceed the configured memory cap."""


class MonotonicityError(NanorevivalError):
    """A torque sweep produced non-monotone revival heights."""
