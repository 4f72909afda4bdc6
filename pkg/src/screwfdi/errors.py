"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A model, layer, or experiment configuration is internally inconsistent."""


class NumericError(ArithmeticError):
    """A computation produced or received non-finite values."""


class IngestionError(ValueError):
    """A CSV file or manifest could not be ingested.

    Carries the offending file and, when known, the 1-based line number.
    """

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)
        self.path = path
        self.line = line


class DegenerateInputError(ValueError):
    """Statistical input has no usable variation (e.g. zero-variance differences)."""


class TrainingDiverged(RuntimeError):
    """Training produced a non-finite loss."""


class ExperimentFailure(RuntimeError):
    """No trial in an experiment produced a usable model."""
