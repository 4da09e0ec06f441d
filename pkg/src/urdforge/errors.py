"""Exception hierarchy shared by all urdforge modules."""


class UrdforgeError(Exception):
    """Base class for every error raised by this package."""


class InvalidSceneError(UrdforgeError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"invalid scene: {head}{more}")


class UnknownIdError(UrdforgeError, KeyError):
    pass


class CategoryNotObjectError(UrdforgeError, ValueError):
    pass


class NonPartClassError(UrdforgeError, ValueError):
    pass


class PackingInfeasibleError(UrdforgeError, ValueError):
    pass


class ConfigError(UrdforgeError, ValueError):
    pass


class UrdfParseError(UrdforgeError, ValueError):
    """Raised by from_urdf; subclasses name the specific failure."""


class MalformedXmlError(UrdfParseError):
    pass


class CyclicJointsError(UrdfParseError):
    pass


class UnsupportedJointTypeError(UrdfParseError):
    pass


class DanglingParentError(UrdfParseError):
    pass


class BehindCameraError(UrdforgeError, ValueError):
    pass


class DegenerateConfigurationError(UrdforgeError, ValueError):
    pass


class EmptyLibraryError(UrdforgeError, ValueError):
    pass


class MissingClassAssetsError(UrdforgeError, ValueError):
    pass


class ZeroExtentError(UrdforgeError, ValueError):
    pass


class OutOfRangeError(UrdforgeError, ValueError):
    pass


class DimensionMismatchError(UrdforgeError, ValueError):
    pass


class NonFiniteCostError(UrdforgeError, ValueError):
    pass


class IdMismatchError(UrdforgeError, ValueError):
    pass


class PredictionFormatError(UrdforgeError, ValueError):
    pass
