"""Exception hierarchy. ``DataError`` subclasses map to CLI exit code 3."""


class RockTraitsError(Exception):
    pass


class ConfigError(RockTraitsError):
    """Invalid or unknown configuration (CLI exit code 2)."""


class DataError(RockTraitsError):
    """Input data violates a contract (CLI exit code 3)."""


class GeoreferenceMissing(DataError):
    pass


class UnsupportedRaster(DataError):
    pass


class TilingError(DataError):
    pass


class DetectionValidationError(DataError):
    def __init__(self, path, problems):
        self.path = path
        self.problems = list(problems)
        lines = "\n  ".join(self.problems)
        super().__init__(f"{path}: {len(self.problems)} problem(s)\n  {lines}")


class EmptyScarp(DataError):
    """No pixel survives slope thresholding and morphology."""


class DegenerateShape(DataError):
    """Mask too small or too thin for a second-moment ellipse."""


class NoGroundTruth(DataError):
    """Metrics are undefined without ground-truth instances."""


class StageError(RockTraitsError):
    """A pipeline stage failed; wraps the underlying error and keeps its exit code."""

    def __init__(self, stage: str, subject, cause: Exception):
        self.stage = stage
        self.subject = subject
        self.cause = cause
        where = f" ({subject})" if subject else ""
        super().__init__(f"stage '{stage}' failed{where}: {cause}")
