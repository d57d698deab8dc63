"""Data-side toolkit for multi-domain extractive question answering."""

__version__ = "0.1.0"

from .records import QA, DatasetStats, DetectedAnswer, Example, Token, validate_example

__all__ = [
    "QA",
    "DatasetStats",
    "DetectedAnswer",
    "Example",
    "Token",
    "validate_example",
    "__version__",
]
