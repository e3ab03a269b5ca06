"""Exception hierarchy shared by every module."""


class FbiError(Exception):
    """Base class for all pipeline errors"""


class ShapeError(FbiError):
    pass


class NonFiniteError(FbiError):
    pass


class GraphError(FbiError):
    pass


class EigenError(FbiError):
    pass


class NoiseParamError(FbiError):
    pass


class RangeError(FbiError):
    pass


class NormalizationError(FbiError):
    pass


class IatGuardError(FbiError):
    pass


class EstimatorError(FbiError):
    pass


class NetConfigError(FbiError):
    pass


class BlindSpotViolation(FbiError):
    """The center pixel is reachable; `path` is a tap sequence summing to (0, 0)"""

    def __init__(self, message: str, path=None):
        super().__init__(message)
        self.path = list(path) if path else []


class TrainingDivergedError(FbiError):
    pass


class FormatError(FbiError):
    pass


class ConfigError(FbiError):
    pass


class DatasetError(FbiError):
    pass
