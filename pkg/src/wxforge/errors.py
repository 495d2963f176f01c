"""Domain error hierarchy.

Every error carries a stable ``kind`` string that the CLI prints as
``error:<kind>: message`` so callers can match on it without parsing prose.
"""

from __future__ import annotations


class WxforgeError(Exception):
    """Base class for all domain errors raised by this package."""

    kind = "error"

    def __str__(self) -> str:
        msg = super().__str__()
        return msg if msg else self.kind


class IoError(WxforgeError):
    kind = "io-error"


class DecodeError(WxforgeError):
    kind = "decode-error"


class ChannelError(WxforgeError):
    kind = "channel-error"


class DimensionMismatchError(WxforgeError):
    kind = "dimension-mismatch"


class MissingSkyRoleError(WxforgeError):
    kind = "missing-sky-role"


class MissingRoadRoleError(WxforgeError):
    kind = "missing-road-role"


class MissingDepthError(WxforgeError):
    kind = "missing-depth"


class DegenerateConfigurationError(WxforgeError):
    kind = "degenerate-configuration"


class UnknownFamilyError(WxforgeError):
    kind = "unknown-family"


class LevelOutOfRangeError(WxforgeError):
    kind = "level-out-of-range"


class ParamRangeError(WxforgeError):
    """A parameter value falls outside its documented range."""

    kind = "param-range"

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class ParseError(WxforgeError):
    kind = "parse-error"


class EmptyInputError(WxforgeError):
    kind = "empty-input"


class InvalidDataError(WxforgeError):
    kind = "invalid-data"


class FormatError(WxforgeError):
    kind = "format-error"


class TruncationError(WxforgeError):
    kind = "truncation-error"


class ProcessFailureError(WxforgeError):
    kind = "process-failure"


class InsufficientSamplesError(WxforgeError):
    kind = "insufficient-samples"


class NonPsdCovarianceError(WxforgeError):
    kind = "non-psd-covariance"


class SpaceTagMismatchError(WxforgeError):
    kind = "space-tag-mismatch"


class ZeroDenominatorError(WxforgeError):
    kind = "zero-denominator"


class UnknownTriggerError(WxforgeError):
    kind = "unknown-trigger"


class LengthMismatchError(WxforgeError):
    kind = "length-mismatch"


class ConstantSeriesError(WxforgeError):
    kind = "constant-series"


class DuplicatePresetError(WxforgeError):
    kind = "duplicate-preset"


class UnknownImageError(WxforgeError):
    kind = "unknown-image"
