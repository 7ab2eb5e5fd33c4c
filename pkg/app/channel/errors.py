# app/channel/errors.py


class ChannelError(Exception):
    """Base class for every domain error raised by the toolkit."""

    exit_code = 2


class ChannelValidationError(ChannelError, ValueError):
    """An input violates a documented invariant."""


class AliasingError(ChannelValidationError):
    """Doppler or delay outside the unaliased range of the sampling grid."""


class DurationMismatchError(ChannelValidationError):
    """Piecewise segment durations do not add up to the record duration."""


class DimensionMismatchError(ChannelValidationError):
    """Region, taper or record dimensions are inconsistent."""


class EmptyGridError(ChannelValidationError):
    """Every region of a grid has zero energy."""


class UndefinedStationarityError(ChannelValidationError):
    """A stationarity series contains undefined entries where defined ones are required."""


class RecordFormatError(ChannelError):
    """An on-disk record or report is malformed."""

    exit_code = 1
