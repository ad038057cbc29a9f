"""
Exception hierarchy.

Every error carries the process exit code the CLI should return for it.
Validation-style errors also subclass ValueError so callers can treat them
like ordinary argument errors.
"""
from pathlib import Path
from typing import List, Optional


class SceneSketchError(Exception):
    """Base class for all package errors."""

    exit_code: int = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigurationError(SceneSketchError):
    """Invalid run configuration, backend selection or layer index."""

    exit_code = 2

    def __init__(self, message: str, keys: Optional[List[str]] = None):
        super().__init__(message)
        self.keys = keys or []


class DomainError(SceneSketchError, ValueError):
    """An argument lies outside the domain an operation is defined on."""

    exit_code = 2


class InvalidTransformError(DomainError):
    """Canvas transform with a non-positive scale."""


class ShapeError(SceneSketchError, ValueError):
    """Tensor or image shapes do not match."""

    exit_code = 2


class SvgParseError(SceneSketchError, ValueError):
    """An SVG document could not be read back into a sketch."""

    exit_code = 2

    def __init__(self, message: str, path_index: Optional[int] = None):
        if path_index is not None:
            message = f"path {path_index}: {message}"
        super().__init__(message)
        self.path_index = path_index


class CapabilityError(SceneSketchError):
    """The selected backend cannot perform the requested operation."""

    exit_code = 2


class EncoderLoadError(SceneSketchError):
    """Pretrained weights could not be located or loaded."""

    exit_code = 2

    def __init__(self, message: str, path: Optional[Path] = None):
        if path is not None:
            message = f"{message}: {path}"
        super().__init__(message)
        self.path = path


class LossError(SceneSketchError):
    """A loss component is NaN or infinite."""

    exit_code = 4


class TrainingDivergedError(LossError):
    """Training produced a non-finite loss; the last finite state was checkpointed."""

    def __init__(self, message: str, iteration: int, checkpoint: Optional[Path] = None):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration
        self.checkpoint = checkpoint


class MissingArtifactError(SceneSketchError):
    """A run directory lacks an artifact an operation needs."""

    exit_code = 3


class PartialMatrixError(SceneSketchError):
    """Some matrix cells failed; the partial run was persisted."""

    exit_code = 5

    def __init__(self, message: str, missing: List[str]):
        super().__init__(message)
        self.missing = missing
