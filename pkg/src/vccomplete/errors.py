"""Exception types raised across the package."""


class VcnError(Exception):
    """Base class for all package errors."""


class EmptyInput(VcnError, ValueError):
    pass


class FrameMismatch(VcnError, ValueError):
    pass


class DegenerateSixD(VcnError, ValueError):
    pass


class DegenerateBox(VcnError, ValueError):
    pass


class ShapeMismatch(VcnError, ValueError):
    pass


class KTooLarge(VcnError, ValueError):
    pass


class OriginPoint(VcnError, ValueError):
    pass


class EmptySelection(VcnError):
    """No point survived lidar subsampling; callers may retry with another seed."""


class InsufficientHits(VcnError):
    pass


class MeshNotFound(VcnError, KeyError):
    pass


class MeshFormatError(VcnError, ValueError):
    """Malformed mesh file. Carries the file path and 1-based line number."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class MissingGrad(VcnError, KeyError):
    pass


class CheckpointError(VcnError):
    pass


class ConfigError(VcnError, ValueError):
    pass


class NumericFailure(VcnError, FloatingPointError):
    """A loss or gradient became NaN/Inf during training."""

    def __init__(self, message, sample_id=None):
        self.sample_id = sample_id
        super().__init__(message)
