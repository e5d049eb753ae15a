"""
Exception hierarchy for the retrieval toolkit.

Every class carries the exit code the CLI reports for it:
1 usage/configuration, 2 data, 3 numeric failure.
"""

from typing import Optional


class MotionRetrievalError(Exception):
    """Base class for all toolkit errors"""
    exit_code = 1


class ConfigError(MotionRetrievalError):
    """Invalid configuration value or CLI combination"""
    exit_code = 1


class DataError(MotionRetrievalError):
    """Input data is missing, malformed or inconsistent"""
    exit_code = 2


class ManifestError(DataError):
    """Malformed manifest record"""

    def __init__(self, message: str, path: Optional[str] = None,
                 line_number: Optional[int] = None):
        self.path = path
        self.line_number = line_number
        location = ""
        if path is not None:
            location = f"{path}"
            if line_number is not None:
                location += f":{line_number}"
            location += ": "
        super().__init__(f"{location}{message}")


class LayoutMismatchError(DataError):
    """Token groups or dimensions differ from the expected motion layout"""


class MotionFormatError(DataError):
    """Motion tensor file cannot be decoded"""


class TextError(DataError):
    """Text is empty after normalization or otherwise unusable"""


class TeacherUnavailableError(DataError):
    """Configured teacher backend cannot serve a request"""


class CheckpointError(DataError):
    """Checkpoint file is unreadable or does not match the requested model"""


class EmbeddingDBError(DataError):
    """Embedding database file is unreadable"""


class ChecksumError(EmbeddingDBError):
    """Stored checksum does not match the payload"""


class NumericalError(MotionRetrievalError):
    """Numeric failure (NaN, divergence, gradient mismatch)"""
    exit_code = 3


class DivergenceError(NumericalError):
    """Non-finite activation or loss"""

    def __init__(self, message: str, epoch: Optional[int] = None,
                 step: Optional[int] = None):
        self.epoch = epoch
        self.step = step
        if epoch is not None:
            message = f"{message} (epoch {epoch}, step {step})"
        super().__init__(message)


class GradCheckFailure(NumericalError):
    """Analytic gradient disagrees with finite differences"""
