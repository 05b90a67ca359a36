"""Camera file: YAML with a top-level ``views`` list.

Each view carries ``width, height, fx, fy, cx, cy, world_to_cam`` (3 rows of 4
numbers), optionally ``near, far`` and ``image`` (a ground-truth image path,
relative to the camera file). An optional top-level ``shading`` mapping uses the
same keys as the ``shading`` section of the settings file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

try:
    import yaml
except ImportError:  # pragma: no cover - exercised when PyYAML missing
    yaml = None  # type: ignore[assignment]

from splatting.app_logging import get_logger
from splatting.camera import ORTHO_TOL, Camera
from splatting.config import parse_shading_config
from splatting.errors import ConfigError, FormatError, InvalidCameraError
from splatting.shading import ShadingConfig

logger = get_logger(__name__)

REORTHO_TOL = 1e-3
REQUIRED_VIEW_KEYS = ("width", "height", "fx", "fy", "cx", "cy", "world_to_cam")
OPTIONAL_VIEW_KEYS = ("near", "far", "image")


@dataclass
class CameraSet:
    cameras: list[Camera]
    image_paths: list[Path | None]
    shading: dict[str, Any] | None = None
    source: Path | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.cameras)


def orthonormalize(rot: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (SVD projection)."""
    u, _, vt = np.linalg.svd(rot)
    out = u @ vt
    if np.linalg.det(out) < 0.0:
        u[:, -1] *= -1.0
        out = u @ vt
    return out


def _view_error(path: Path, index: int, message: str) -> FormatError:
    return FormatError(str(path), f"views[{index}]: {message}")


def _number(path: Path, index: int, view: Mapping[str, Any], key: str) -> float:
    value = view[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _view_error(path, index, f"{key} must be a number, got {value!r}")
    return float(value)


def _parse_view(path: Path, index: int, view: Any) -> tuple[Camera, Path | None]:
    if not isinstance(view, dict):
        raise _view_error(path, index, "each view must be a mapping")
    missing = [k for k in REQUIRED_VIEW_KEYS if k not in view]
    if missing:
        raise _view_error(path, index, f"missing fields {missing}")
    unknown = set(view) - set(REQUIRED_VIEW_KEYS) - set(OPTIONAL_VIEW_KEYS)
    if unknown:
        raise _view_error(path, index, f"unknown fields {sorted(unknown)}")
    try:
        m = np.asarray(view["world_to_cam"], dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise _view_error(path, index, f"world_to_cam is not numeric: {e}") from e
    if m.shape != (3, 4) or not np.all(np.isfinite(m)):
        raise _view_error(path, index, f"world_to_cam must be 3 finite rows of 4, got shape {m.shape}")
    rot = m[:, :3]
    drift = float(np.max(np.abs(rot @ rot.T - np.eye(3))))
    if drift > REORTHO_TOL:
        raise _view_error(path, index, f"rotation is not orthonormal (max drift {drift:.3g})")
    if drift > ORTHO_TOL:
        logger.warning("views[%d] in %s: re-orthonormalizing rotation (drift %.3g)", index, path, drift)
        rot = orthonormalize(rot)
    intrinsics: dict[str, Any] = {key: _number(path, index, view, key) for key in ("fx", "fy", "cx", "cy")}
    for key in ("width", "height"):
        value = view[key]
        if isinstance(value, bool) or not isinstance(value, int):
            raise _view_error(path, index, f"{key} must be an integer, got {value!r}")
        intrinsics[key] = value
    for key in ("near", "far"):
        if key in view:
            intrinsics[key] = _number(path, index, view, key)
    try:
        cam = Camera(rotation=rot, translation=m[:, 3], **intrinsics)
    except InvalidCameraError as e:
        raise _view_error(path, index, str(e)) from e
    image = view.get("image")
    if image is not None and not isinstance(image, str):
        raise _view_error(path, index, f"image must be a path string, got {image!r}")
    return cam, (path.parent / image if image else None)


def load_cameras(path: Path | str) -> CameraSet:
    """Validated cameras, their image paths and the optional shading block."""
    path = Path(path)
    if yaml is None:
        raise ImportError("PyYAML is required to read camera files. Install with: pip install PyYAML")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(str(path), f"unreadable camera file: {e}") from e
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise FormatError(str(path), f"invalid YAML: {e}", line=mark.line + 1 if mark else None) from e
    if not isinstance(raw, dict) or not isinstance(raw.get("views"), list):
        raise FormatError(str(path), 'expected a mapping with a "views" list')
    cameras, images = [], []
    for i, view in enumerate(raw["views"]):
        cam, image = _parse_view(path, i, view)
        cameras.append(cam)
        images.append(image)
    shading = raw.get("shading")
    if shading is not None and not isinstance(shading, dict):
        raise FormatError(str(path), "shading must be a mapping")
    logger.info("loaded %d cameras from %s", len(cameras), path)
    return CameraSet(cameras=cameras, image_paths=images, shading=shading, source=path)


def shading_override(cams: CameraSet, base: ShadingConfig) -> ShadingConfig:
    """base overlaid with the camera file's shading block, if any."""
    if not cams.shading:
        return base
    try:
        return parse_shading_config(cams.shading, base)
    except ConfigError as e:
        raise FormatError(str(cams.source), f"shading: {e}") from e


def camera_to_dict(cam: Camera, image: str | None = None) -> dict[str, Any]:
    out: dict[str, Any] = {
        "width": int(cam.width),
        "height": int(cam.height),
        "fx": float(cam.fx),
        "fy": float(cam.fy),
        "cx": float(cam.cx),
        "cy": float(cam.cy),
        "near": float(cam.near),
        "far": float(cam.far),
        "world_to_cam": [[float(v) for v in row] for row in cam.world_to_cam],
    }
    if image is not None:
        out["image"] = image
    return out


def save_cameras(
    path: Path | str,
    cameras: Sequence[Camera],
    images: Sequence[str | None] | None = None,
    shading: Mapping[str, Any] | None = None,
) -> None:
    """Write a camera file; image entries are stored verbatim (relative to path)."""
    if yaml is None:
        raise ImportError("PyYAML is required to write camera files. Install with: pip install PyYAML")
    images = list(images) if images is not None else [None] * len(cameras)
    if len(images) != len(cameras):
        raise ValueError(f"{len(cameras)} cameras but {len(images)} image entries")
    doc: dict[str, Any] = {"views": [camera_to_dict(c, img) for c, img in zip(cameras, images)]}
    if shading:
        doc["shading"] = {k: list(v) if isinstance(v, tuple) else v for k, v in shading.items()}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        yaml.safe_dump(doc, f, sort_keys=False, default_flow_style=None)
