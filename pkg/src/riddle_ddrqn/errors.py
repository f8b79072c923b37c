"""Exception types shared across the package."""


class RiddleError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(RiddleError):
    """A configuration value is out of range or inconsistent."""


class ProtocolViolationError(RiddleError):
    """An environment was driven out of turn or after termination."""


class NotTerminalError(RiddleError):
    """A terminal-only query was made on a non-terminal state."""


class BoundsError(RiddleError):
    """An exact computation was requested outside its tractable bounds."""


class AlignmentError(RiddleError):
    """Two metric streams do not share a common evaluation grid."""


class EmptyInputError(RiddleError):
    """An analysis was requested on an empty trace collection."""


class DataError(RiddleError):
    """A data file failed to parse.  Carries the offending line number."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number
