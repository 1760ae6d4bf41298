"""Exception hierarchy. Exit codes are consumed by the command-line interface."""


class KddVaeError(Exception):
    """Base class for package errors."""

    exit_code = 1


class ConfigError(KddVaeError):
    """Invalid configuration or unusable option combination."""

    exit_code = 2


class DataError(KddVaeError):
    """Problem with input data or stored artifacts."""

    exit_code = 3


class ParseError(DataError, ValueError):
    """Malformed dataset file; message names the offending line."""


class UnknownLabelError(DataError, ValueError):
    """Attack label outside the known NSL-KDD label set."""


class CheckpointError(DataError):
    """Unreadable, truncated, or corrupted model checkpoint."""


class ArchiveError(DataError):
    """Unreadable or inconsistent encoded-split archive."""


class TrainingError(KddVaeError):
    """Failure while fitting the model."""

    exit_code = 4


class TrainingDivergedError(TrainingError):
    """Loss became non-finite during training."""


class GradientError(TrainingError):
    """Non-finite gradient reached the optimizer."""


class EvalError(KddVaeError):
    """Failure while scoring or evaluating."""

    exit_code = 5
