"""
Shared plumbing: exception hierarchy and logging setup.
"""

from .errors import (
    MotionRetrievalError,
    ConfigError,
    DataError,
    ManifestError,
    LayoutMismatchError,
    MotionFormatError,
    TextError,
    TeacherUnavailableError,
    CheckpointError,
    EmbeddingDBError,
    ChecksumError,
    NumericalError,
    DivergenceError,
    GradCheckFailure,
)
from .log import setup_logging

__all__ = [
    'MotionRetrievalError', 'ConfigError', 'DataError', 'ManifestError',
    'LayoutMismatchError', 'MotionFormatError', 'TextError',
    'TeacherUnavailableError', 'CheckpointError', 'EmbeddingDBError',
    'ChecksumError', 'NumericalError', 'DivergenceError', 'GradCheckFailure',
    'setup_logging',
]
