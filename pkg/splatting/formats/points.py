"""Point-file input: one initial Gaussian per point.

Accepted inputs:

- PLY (binary or ASCII) with a ``vertex`` element holding x, y, z and optionally
  red, green, blue (8-bit, or floats in [0, 1]).
- Text: one point per line, ``x y z [r g b]`` separated by whitespace or commas,
  colors in [0, 1]. Blank lines and lines starting with ``#`` are skipped.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from plyfile import PlyData, PlyElement
from scipy.spatial import cKDTree
from scipy.special import logit

from splatting.app_logging import get_logger
from splatting.errors import FormatError
from splatting.scene import GaussianCloud
from splatting.sh import SH_COEFFS, rgb_to_sh0

logger = get_logger(__name__)

INIT_OPACITY = 0.1
INIT_SPECULAR = 0.1
NEIGHBOURS = 3
MIN_NEIGHBOUR_DIST = 1e-7
DEFAULT_GRAY = 0.5


def _read_ply(path: Path) -> tuple[np.ndarray, np.ndarray | None]:
    try:
        ply = PlyData.read(str(path))
    except Exception as e:  # plyfile raises a mix of PlyParseError, ValueError and struct errors
        raise FormatError(str(path), f"unreadable PLY: {e}") from e
    if "vertex" not in ply:
        raise FormatError(str(path), 'PLY has no "vertex" element')
    vertex = ply["vertex"].data
    names = set(vertex.dtype.names or [])
    if not {"x", "y", "z"} <= names:
        raise FormatError(str(path), "PLY vertex element is missing x/y/z")
    positions = np.stack([vertex["x"], vertex["y"], vertex["z"]], axis=1).astype(np.float64)
    colors = None
    if {"red", "green", "blue"} <= names:
        raw = np.stack([vertex["red"], vertex["green"], vertex["blue"]], axis=1)
        colors = raw.astype(np.float64) / 255.0 if raw.dtype.kind in "ui" else raw.astype(np.float64)
    return positions, colors


def _read_text(path: Path) -> tuple[np.ndarray, np.ndarray | None]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise FormatError(str(path), f"unreadable point file: {e}") from e
    rows: list[list[float]] = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        fields = text.replace(",", " ").split()
        if len(fields) not in (3, 6):
            raise FormatError(str(path), f"expected 3 or 6 values, got {len(fields)}", line=lineno)
        if width is not None and len(fields) != width:
            raise FormatError(str(path), f"expected {width} values like earlier records, got {len(fields)}", line=lineno)
        width = len(fields)
        try:
            values = [float(f) for f in fields]
        except ValueError as e:
            raise FormatError(str(path), f"non-numeric value: {e}", line=lineno) from e
        if not np.all(np.isfinite(values)):
            raise FormatError(str(path), "non-finite value", line=lineno)
        rows.append(values)
    if not rows:
        raise FormatError(str(path), "no points found")
    data = np.asarray(rows, dtype=np.float64)
    return data[:, :3], (data[:, 3:6] if data.shape[1] == 6 else None)


def neighbour_log_scales(positions: np.ndarray) -> np.ndarray:
    """log(max(mean distance to the 3 nearest neighbours, 1e-7)) per point."""
    n = len(positions)
    if n < 2:
        return np.full(n, np.log(MIN_NEIGHBOUR_DIST))
    k = min(NEIGHBOURS, n - 1)
    dist, _ = cKDTree(positions).query(positions, k=k + 1)
    mean = np.asarray(dist)[:, 1:].mean(axis=1)
    return np.log(np.maximum(mean, MIN_NEIGHBOUR_DIST))


def cloud_from_points(positions: np.ndarray, colors: np.ndarray | None = None) -> GaussianCloud:
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    rgb = np.full((n, 3), DEFAULT_GRAY) if colors is None else np.clip(np.asarray(colors, dtype=np.float64), 0.0, 1.0)
    sh_diffuse = np.zeros((n, SH_COEFFS, 3))
    sh_diffuse[:, 0, :] = rgb_to_sh0(rgb)
    rotations = np.zeros((n, 4))
    rotations[:, 0] = 1.0
    return GaussianCloud(
        positions=positions,
        log_scales=np.repeat(neighbour_log_scales(positions)[:, None], 3, axis=1),
        rotations=rotations,
        opacity_logits=np.full(n, logit(INIT_OPACITY)),
        sh_diffuse=sh_diffuse,
        sh_specular=np.zeros((n, SH_COEFFS, 3)),
        specular_logits=np.full(n, logit(INIT_SPECULAR)),
        visibility=np.ones(n),
        local_light=np.zeros((n, 3)),
    )


def load_points(path: Path | str) -> GaussianCloud:
    """Initial cloud from a PLY or text point file."""
    path = Path(path)
    if not path.is_file():
        raise FormatError(str(path), "file not found")
    if path.suffix.lower() == ".ply":
        positions, colors = _read_ply(path)
    else:
        positions, colors = _read_text(path)
    if len(positions) == 0:
        raise FormatError(str(path), "no points found")
    logger.info("loaded %d points from %s (colors=%s)", len(positions), path, colors is not None)
    return cloud_from_points(positions, colors)


def save_points(path: Path | str, positions: np.ndarray, colors: np.ndarray | None = None) -> None:
    """Binary PLY with float32 positions and optional 8-bit colors."""
    positions = np.asarray(positions, dtype=np.float64)
    dtype = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    if colors is not None:
        dtype += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    elements = np.empty(len(positions), dtype=dtype)
    elements["x"], elements["y"], elements["z"] = positions[:, 0], positions[:, 1], positions[:, 2]
    if colors is not None:
        rgb = np.round(np.clip(np.asarray(colors, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
        elements["red"], elements["green"], elements["blue"] = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    PlyData([PlyElement.describe(elements, "vertex")]).write(str(path))
