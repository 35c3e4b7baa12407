"""Exception hierarchy shared by all modules."""


class LidarStereoError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(LidarStereoError, ValueError):
    """Input data violates a documented precondition."""


class InvalidParameterError(InvalidInputError):
    """A tuning parameter is outside its admissible range."""


class EmptyReportError(InvalidInputError):
    """No holdout point could be scored."""


class FormatError(LidarStereoError):
    """A file on disk does not follow the expected container format."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset
