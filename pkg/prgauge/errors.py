from typing import Optional


class PrgaugeError(Exception):
    pass


class ConfigError(PrgaugeError):
    pass


class InvalidNetworkError(PrgaugeError):
    pass


class ShapeMismatchError(PrgaugeError):
    pass


class TrainingDivergedError(PrgaugeError):
    pass


class InvalidDatasetError(PrgaugeError):
    pass


class PerturbationModalityError(PrgaugeError):
    pass


class InvalidPerturbationError(PrgaugeError):
    pass


class EmptyCurvePointError(PrgaugeError):
    def __init__(self, alpha: float):
        super().__init__(f"Every batch was dropped at alpha={alpha:.6g}; no pairs survived the label filter")
        self.alpha = alpha


class InvalidCurveError(PrgaugeError):
    pass


class DegeneratePalError(PrgaugeError):
    pass


class PalNotApplicableError(PrgaugeError):
    pass


class OffGridError(PrgaugeError):
    pass


class InvalidScoreMatrixError(PrgaugeError):
    pass


class PcaConvergenceError(PrgaugeError):
    pass


class NoComparablePairsError(PrgaugeError):
    pass


class InsufficientModelsError(PrgaugeError):
    pass


class MissingPrerequisiteError(PrgaugeError):
    def __init__(self, path: str, hint: Optional[str] = None):
        message = f"Missing prerequisite file: {path}"
        if hint:
            message += f" ({hint})"
        super().__init__(message)
        self.path = path


class ArtifactFormatError(PrgaugeError):
    def __init__(self, path: str, message: str, line: Optional[int] = None):
        location = f"{path}:{line}" if line is not None else path
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line
