"""Exception types shared across the toolkit."""


class ChadkitError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(ChadkitError):
    """Shapes, field names, or category indices do not match the schema."""


class DataError(ChadkitError):
    """A data file cannot be parsed (malformed row, bad cell, missing column)."""


class ConfigError(ChadkitError):
    """Invalid or incomplete configuration."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class MetricError(ChadkitError):
    """A metric is undefined for the given inputs (e.g. single-class labels)."""


class TrainingDiverged(ChadkitError):
    """Training hit a non-finite loss or gradient."""
