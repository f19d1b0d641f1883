"""Exception types shared across the package.

Every stage raises a subclass of StallSentinelError so the CLI can report
which stage failed and exit nonzero without a traceback.
"""


class StallSentinelError(Exception):
    """Base class for all errors raised by this package."""


class PgmError(StallSentinelError):
    """Malformed or unsupported PGM/PPM content."""


class ManifestError(StallSentinelError):
    """Malformed frame manifest or inconsistent frame data."""


class BackgroundError(StallSentinelError):
    """Invalid background-model input (dimension mismatch, bad params)."""


class DetectionError(StallSentinelError):
    """Malformed detection records or invalid filter arguments."""


class MaskError(StallSentinelError):
    """Region-of-interest mask is malformed (non-binary, wrong size)."""


class CandidateError(StallSentinelError):
    """Candidate selection failed (bad clustering arguments)."""


class SimilarityError(StallSentinelError):
    """Invalid similarity computation arguments (shape or window issues)."""


class SequentialError(StallSentinelError):
    """Invalid sequential-detection input or calibration artifact."""


class MetricsError(StallSentinelError):
    """Malformed ground-truth/prediction files or invalid metric input."""


class SceneSpecError(StallSentinelError):
    """Malformed synthetic scene specification."""


class ConfigError(StallSentinelError):
    """Invalid pipeline configuration key, value, or range."""


class PipelineError(StallSentinelError):
    """Pipeline-level input problem (missing files, nothing to process)."""
