"""Exception hierarchy for the splatting library.

Library code raises these; only the CLI turns them into exit codes.
Culling and FLAT voxels are ordinary outcomes and never raise.
"""

from __future__ import annotations


class SplattingError(Exception):
    """Base error for the splatting library."""


class DegenerateGaussianError(SplattingError, ValueError):
    """A Gaussian's covariance is singular (a scale at or below the floor)."""


class NonUnitDirectionError(SplattingError, ValueError):
    """A direction passed to SH evaluation or reflection is not unit length."""


class BoundaryIndexError(SplattingError, IndexError):
    """A voxel index is not interior to the density grid."""


class DimensionMismatchError(SplattingError, ValueError):
    """Two images (or an image and a camera) disagree on size."""


class NonFiniteGradientError(SplattingError, ValueError):
    """An optimizer step received NaN/inf partials."""

    def __init__(self, field: str, count: int) -> None:
        super().__init__(f"non-finite gradient in {field!r} ({count} entries)")
        self.field = field
        self.count = count


class FormatError(SplattingError, ValueError):
    """A scene, camera, checkpoint or image file could not be parsed."""

    def __init__(self, path: str, message: str, *, line: int | None = None, offset: int | None = None) -> None:
        where = ""
        if line is not None:
            where = f":{line}"
        elif offset is not None:
            where = f"@{offset}"
        super().__init__(f"{path}{where}: {message}")
        self.path = path
        self.line = line
        self.offset = offset


class ConfigError(SplattingError, ValueError):
    """A configuration value is missing or out of range."""


class InvalidCameraError(SplattingError, ValueError):
    """Camera intrinsics or pose violate their invariants."""


class EmptyCloudError(SplattingError, ValueError):
    """An operation that needs at least one Gaussian got an empty cloud."""
