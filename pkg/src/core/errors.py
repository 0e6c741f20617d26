"""
Error hierarchy for the culture-graph pipeline.

Every error carries the process exit code the CLI reports for it:
- 1: configuration problems
- 2: data problems (missing files, bad schemas, unusable inputs)
- 3: anything unexpected
"""

from typing import Iterable, List


class CultureGraphError(Exception):
    """Base class for all pipeline errors."""

    exit_code: int = 3


class ConfigError(CultureGraphError):
    """Invalid or incomplete run configuration."""

    exit_code = 1


class DataError(CultureGraphError):
    """Input data cannot be used as given."""

    exit_code = 2


class MissingFileError(DataError):
    """A required input file does not exist."""

    def __init__(self, label: str, path):
        self.label = label
        self.path = path
        super().__init__(f"{label} file not found: {path}")


class SchemaError(DataError):
    """A file header or document structure does not match the expected schema."""


class UnbalancedPanelError(DataError):
    """Repeated-measures input where some wards lack a complete year series."""

    def __init__(self, wards: Iterable[str]):
        self.wards: List[str] = sorted(wards)
        shown = ", ".join(self.wards[:20])
        more = "" if len(self.wards) <= 20 else f" (+{len(self.wards) - 20} more)"
        super().__init__(f"unbalanced panel, incomplete wards: {shown}{more}")


class ModelError(CultureGraphError):
    """A learner cannot be trained or applied to the given data."""

    exit_code = 2
