"""Exception hierarchy for the reviewlens engine.

Every domain failure raises a subclass of ReviewLensError so front ends
(CLI, HTTP service) can map them to exit code 1 / non-2xx responses
without catching bare exceptions.
"""


class ReviewLensError(Exception):
    """Base class for all engine errors."""


class ManifestError(ReviewLensError):
    """Malformed or invariant-violating corpus manifest."""


class NotFoundError(ReviewLensError):
    """A referenced id (image, document, resource) does not exist."""


class DimensionError(ReviewLensError):
    """Array shapes or feature dimensions do not match the contract."""


class FormatError(ReviewLensError):
    """A binary or JSON artifact does not match its declared format."""


class CorruptionError(FormatError):
    """A store file is internally inconsistent (truncated or miscounted)."""

    def __init__(self, message: str, record_index: int | None = None):
        super().__init__(message)
        self.record_index = record_index


class ToolError(ReviewLensError):
    """An external tool (rasterizer) failed; carries its diagnostics."""


class EmptyDocumentError(ReviewLensError):
    """Rasterization produced zero pages."""


class DecodeError(ReviewLensError):
    """Image bytes could not be decoded."""


class InvalidImageError(ReviewLensError):
    """Decoded image is unusable (zero area)."""


class BackboneError(ReviewLensError):
    """Backbone or detector adapter could not load or run."""


class EmptyBatchError(ReviewLensError):
    """An operation that needs at least one example received none."""


class DegenerateDataError(ReviewLensError):
    """Training data does not contain both classes."""


class DegenerateInputError(ReviewLensError):
    """Input lacks the variety an algorithm needs (e.g. k > distinct points)."""


class ConfigError(ReviewLensError):
    """A configuration value is out of range or inconsistent."""


class InconsistencyError(ReviewLensError):
    """Two artifacts that must agree (assignments vs manifest, job states) do not."""


class MissingLabelError(ReviewLensError):
    """A scored id has no ground-truth label."""


class UndefinedRecallError(ReviewLensError):
    """Recall is undefined because the ground truth contains no positives."""


class SchemaError(ReviewLensError):
    """A structured document is missing a required field."""


class ParseError(ReviewLensError):
    """A document could not be parsed at all; message carries the location."""


class ValidationError(ReviewLensError):
    """A value violates a domain invariant (box geometry, score range, label)."""
