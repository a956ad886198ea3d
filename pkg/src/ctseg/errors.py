"""Exception types shared across the toolkit."""


class CtsegError(Exception):
    """Base class for all toolkit errors."""


class DegenerateContour(CtsegError):
    """Contour has too few distinct vertices or zero perimeter."""


class ImageTooSmall(CtsegError):
    """Image cannot support the requested pyramid depth."""


class InvalidFamilySpec(CtsegError):
    """Synthetic shape family spec has empty or inverted ranges."""


class MissingExemplar(CtsegError):
    """Dataset manifest does not name an exemplar."""


class MalformedJson(CtsegError):
    """A JSON file does not match the expected schema."""


class ImageContourMismatch(CtsegError):
    """Contour vertices fall outside the image bounds."""


class ShapeMismatch(CtsegError):
    """Tensor shapes incompatible for the requested primitive."""


class NonScalarLoss(CtsegError):
    """backward() called on a non-scalar value."""


class DoubleBackward(CtsegError):
    """backward() called twice on the same tape."""


class VertexCountMismatch(CtsegError):
    """Two contours that must share N do not."""


class PyramidMismatch(CtsegError):
    """Feature pyramids do not share level structure."""


class SingularL(CtsegError):
    """TPS system matrix is numerically singular."""


class NonFiniteGradient(CtsegError):
    """A gradient tensor contains NaN or Inf."""

    def __init__(self, tensor_name: str):
        super().__init__(f"non-finite gradient in tensor {tensor_name!r}")
        self.tensor_name = tensor_name


class DatasetInvalid(CtsegError):
    """Dataset violates the one-shot training preconditions."""


class MissingGroundTruth(CtsegError):
    """Operation requires ground-truth contours that are absent."""


class ContourOutOfImage(CtsegError):
    """All contour vertices left the image; evolution diverged."""
