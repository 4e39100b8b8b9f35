from typing import Optional


class CalibrationError(Exception):
    """Base error for every failure raised by the calibration toolkit"""

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def with_stage(self, stage: str) -> "CalibrationError":
        """Tag the error with the pipeline stage it escaped from (keeps an inner tag)"""
        if self.stage is None:
            self.stage = stage
        return self

    def __str__(self) -> str:
        if self.stage:
            return f"[{self.stage}] {self.message}"
        return self.message


class ConfigurationError(CalibrationError):
    pass


class NoModelFound(CalibrationError):
    pass


class DegenerateBasis(CalibrationError):
    pass


class NotEnoughCircles(CalibrationError):
    pass


class GeometryMismatch(CalibrationError):
    pass


class ClusterCountMismatch(CalibrationError):
    pass


class AmbiguousLabeling(CalibrationError):
    pass


class DegenerateConfiguration(CalibrationError):
    pass


class InsufficientDetections(CalibrationError):
    pass


class UnknownSetting(CalibrationError):
    pass


class SceneValidationError(CalibrationError):
    pass


class DirectionMismatch(CalibrationError):
    pass


class DatasetError(CalibrationError):
    """Malformed or missing frame / ground-truth files"""
