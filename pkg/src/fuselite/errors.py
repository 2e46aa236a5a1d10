"""Exception types shared across the toolkit."""


class FuseliteError(Exception):
    """Base class for all toolkit errors."""


class DegenerateCorners(FuseliteError):
    """The four corner correspondences do not determine a homography."""


class DegenerateMatrix(FuseliteError):
    """Homography is singular or maps a corner to a point at infinity."""


class DimensionMismatch(FuseliteError):
    """Operands have incompatible spatial dimensions."""


class MissingReference(FuseliteError):
    """Exposure stack has no reference image."""


class DecodeError(FuseliteError):
    """Image file could not be decoded."""


class TooFewImages(FuseliteError):
    """Exposure stack holds fewer than two images."""


class ImageTooSmall(FuseliteError):
    """Image cannot host a patch plus the perturbation margin."""


class ShapeMismatch(FuseliteError):
    """Tensor shapes violate a network or loss contract."""


class PatchSizeMismatch(FuseliteError):
    """Corner offsets are expressed for different patch sizes."""


class WeightsUnavailable(FuseliteError):
    """Pretrained feature-extractor weights were requested but not found."""


class CheckpointMismatch(FuseliteError):
    """Checkpoint shapes or architecture version do not match the model."""


class DataUnavailable(FuseliteError):
    """Training manifest is empty or its files are unreadable."""


class NonFiniteLoss(FuseliteError):
    """A training loss became NaN or infinite."""
