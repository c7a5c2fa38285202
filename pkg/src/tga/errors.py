"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map it without a lookup
table: 2 config/flag, 3 data, 4 numeric divergence, 5 capability mismatch.
"""


class TGAError(Exception):
    exit_code = 1
    kind = "error"


class ConfigError(TGAError, ValueError):
    exit_code = 2
    kind = "config"


class InvalidRatioError(ConfigError):
    kind = "invalid_ratio"


class DataError(TGAError, ValueError):
    exit_code = 3
    kind = "data"


class DimensionError(DataError):
    kind = "dimension"


class EmptyGraphError(DataError):
    kind = "empty_graph"


class ConstantSignalError(DataError):
    kind = "constant_signal"

    def __init__(self, column: int, message: str | None = None):
        self.column = column
        super().__init__(message or f"column {column} has zero variance")


class DegenerateGraphError(DataError):
    kind = "degenerate_graph"


class ClassScarcityError(DataError):
    kind = "class_scarcity"


class UndefinedMetricError(DataError):
    kind = "undefined_metric"

    def __init__(self, metric: str, reason: str):
        self.metric = metric
        super().__init__(f"{metric} is undefined: {reason}")


class CheckpointError(DataError):
    kind = "checkpoint"


class BadMagicError(CheckpointError):
    kind = "bad_magic"


class VersionMismatchError(CheckpointError):
    kind = "version_mismatch"


class TruncatedPayloadError(CheckpointError):
    kind = "truncated_payload"


class NumericError(TGAError, ArithmeticError):
    exit_code = 4
    kind = "numeric"


class DegenerateEmbeddingError(NumericError):
    kind = "degenerate_embedding"


class TrainingDivergedError(NumericError):
    kind = "diverged"


class CapabilityError(TGAError):
    exit_code = 5
    kind = "capability"


class LabelRangeError(DataError, IndexError):
    kind = "label_range"
