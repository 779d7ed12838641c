"""
Error hierarchy for altisplat.

Every failure raised by the library derives from AltisplatError so the CLI can
map it to a runtime exit code. Validation and domain errors also derive from
ValueError.
"""

from typing import Optional


class AltisplatError(Exception):
    """Base class for all library errors."""


class GeometryError(AltisplatError, ValueError):
    """Invalid camera, ray or pose input."""


class DegenerateGeometryError(GeometryError):
    """Epipolar geometry is undefined for the given rig or point."""


class MaskError(AltisplatError, ValueError):
    """Invalid attention mask or token grid."""


class SceneError(AltisplatError, ValueError):
    """Invalid Gaussian scene content."""


class RenderError(AltisplatError):
    """Rendering failed."""


class NonFiniteGradientError(RenderError):
    """A gradient became NaN or infinite."""

    def __init__(self, parameter: str, index: Optional[int] = None):
        self.parameter = parameter
        self.index = index
        where = f" at primitive {index}" if index is not None else ""
        super().__init__(f"Non-finite gradient for '{parameter}'{where}")


class LossError(AltisplatError, ValueError):
    """Invalid metric or loss input."""


class TrajectoryError(AltisplatError, ValueError):
    """Invalid trajectory strategy, schedule or camera."""


class PipelineError(AltisplatError):
    """Progressive pipeline failure."""


class DivergenceError(PipelineError):
    """Training loss became non-finite."""

    def __init__(self, iteration: int, loss: float):
        self.iteration = iteration
        self.loss = loss
        super().__init__(f"Training diverged at iteration {iteration} (loss={loss})")


class FixerError(PipelineError):
    """A fixer could not produce an image for a view."""


class ParseError(AltisplatError, ValueError):
    """Malformed input file."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = ""):
        self.line = line
        self.source = source
        location = ""
        if source:
            location = f"{source}"
        if line is not None:
            location = f"{location}:{line}" if location else f"line {line}"
        super().__init__(f"{location}: {message}" if location else message)


class CheckpointError(AltisplatError, ValueError):
    """Unreadable or corrupted scene checkpoint."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint written by a newer format version."""
