# errors.py


class PrivacyLabError(Exception):
    """Base class for every error raised by the library"""


class DimensionError(PrivacyLabError, ValueError):
    """Operand shapes do not conform"""


class DegenerateInputError(PrivacyLabError, ValueError):
    """Sequence too short (or empty) for the requested operation"""


class GraphError(PrivacyLabError):
    """Malformed computation graph (cycle, non-scalar loss)"""


class NumericError(PrivacyLabError, ArithmeticError):
    """Non-finite value met during training or gradient checking"""


class ConfigError(PrivacyLabError, ValueError):
    """Invalid configuration value or combination"""


class DomainError(PrivacyLabError, ValueError):
    """Argument outside the domain of the function"""


class DataError(PrivacyLabError, ValueError):
    """Training or evaluation data violates a precondition"""


class SpecError(PrivacyLabError, ValueError):
    """Invalid ModelSpec or unknown head"""


class SelectionError(PrivacyLabError):
    """No candidate model satisfies the selection constraint"""


class EnsembleError(PrivacyLabError):
    """A seed run of an ensemble failed"""

    def __init__(self, seed, cause):
        super().__init__(f"Seed {seed} failed: {cause}")
        self.seed = seed
        self.cause = cause


class ProtocolError(PrivacyLabError):
    """Attack protocol preconditions violated"""


class MetricError(PrivacyLabError, ValueError):
    """Metric undefined for the given predictions/labels"""


class CheckpointError(PrivacyLabError):
    """Checkpoint missing, truncated or inconsistent with its manifest"""


class ReportError(PrivacyLabError):
    """Serialised report does not match its published schema"""


class StageError(PrivacyLabError):
    """Wraps any failure of an experiment stage with its name and config hash"""

    def __init__(self, stage, config_hash, cause):
        super().__init__(f"Stage '{stage}' failed (config {config_hash[:12]}): {cause}")
        self.stage = stage
        self.config_hash = config_hash
        self.cause = cause


class LabelIndexError(PrivacyLabError, IndexError):
    """Class label outside [0, K)"""
