"""Gaussian scene representation.

A GaussianCloud stores its Gaussians as parallel arrays (one row per Gaussian,
in a stable order); Gaussian3D is the single-primitive view used by the
per-Gaussian operations and by tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit, logit

from splatting.errors import DegenerateGaussianError
from splatting.sh import SH_COEFFS

SCALE_FLOOR = 1e-7
NORMAL_TIE_TOL = 1e-9

# Per-Gaussian arrays of a GaussianCloud, in checkpoint order. Trailing shape per row.
PER_GAUSSIAN_FIELDS: tuple[tuple[str, tuple[int, ...]], ...] = (
    ("positions", (3,)),
    ("log_scales", (3,)),
    ("rotations", (4,)),
    ("opacity_logits", ()),
    ("sh_diffuse", (SH_COEFFS, 3)),
    ("sh_specular", (SH_COEFFS, 3)),
    ("specular_logits", ()),
    ("visibility", ()),
    ("local_light", (3,)),
)
FIELD_NAMES = tuple(name for name, _ in PER_GAUSSIAN_FIELDS)


def scales_from_log(log_scales: np.ndarray) -> np.ndarray:
    """exp(log_scale) floored at SCALE_FLOOR."""
    return np.maximum(np.exp(log_scales), SCALE_FLOOR)


def normalize_quaternions(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Rotation matrices for (w, x, y, z) quaternions of shape (..., 4); normalizes first."""
    q = normalize_quaternions(q)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    rot = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    rot[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    rot[..., 0, 1] = 2.0 * (x * y - w * z)
    rot[..., 0, 2] = 2.0 * (x * z + w * y)
    rot[..., 1, 0] = 2.0 * (x * y + w * z)
    rot[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    rot[..., 1, 2] = 2.0 * (y * z - w * x)
    rot[..., 2, 0] = 2.0 * (x * z - w * y)
    rot[..., 2, 1] = 2.0 * (y * z + w * x)
    rot[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return rot


def quat_to_rotmat_backward(q: np.ndarray, d_rot: np.ndarray) -> np.ndarray:
    """Chain dL/dR (..., 3, 3) back to the raw (unnormalized) quaternion (..., 4)."""
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    qn = q / norm
    w, x, y, z = qn[..., 0], qn[..., 1], qn[..., 2], qn[..., 3]
    g = d_rot
    dw = 2.0 * (
        -z * g[..., 0, 1] + y * g[..., 0, 2]
        + z * g[..., 1, 0] - x * g[..., 1, 2]
        - y * g[..., 2, 0] + x * g[..., 2, 1]
    )
    dx = 2.0 * (
        y * g[..., 0, 1] + z * g[..., 0, 2]
        + y * g[..., 1, 0] - 2.0 * x * g[..., 1, 1] - w * g[..., 1, 2]
        + z * g[..., 2, 0] + w * g[..., 2, 1] - 2.0 * x * g[..., 2, 2]
    )
    dy = 2.0 * (
        -2.0 * y * g[..., 0, 0] + x * g[..., 0, 1] + w * g[..., 0, 2]
        + x * g[..., 1, 0] + z * g[..., 1, 2]
        - w * g[..., 2, 0] + z * g[..., 2, 1] - 2.0 * y * g[..., 2, 2]
    )
    dz = 2.0 * (
        -2.0 * z * g[..., 0, 0] - w * g[..., 0, 1] + x * g[..., 0, 2]
        + w * g[..., 1, 0] - 2.0 * z * g[..., 1, 1] + y * g[..., 1, 2]
        + x * g[..., 2, 0] + y * g[..., 2, 1]
    )
    d_qn = np.stack([dw, dx, dy, dz], axis=-1)
    # normalization: d qn / d q = (I - qn qn^T) / |q|
    radial = np.sum(d_qn * qn, axis=-1, keepdims=True)
    return (d_qn - radial * qn) / norm


def build_covariances(log_scales: np.ndarray, rotations: np.ndarray) -> np.ndarray:
    """Sigma = R S S^T R^T for (N, 3) log scales and (N, 4) quaternions."""
    rot = quat_to_rotmat(rotations)
    m = rot * scales_from_log(log_scales)[..., None, :]
    return m @ np.swapaxes(m, -1, -2)


def build_covariance(log_scale: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    """3x3 covariance of one Gaussian."""
    return build_covariances(np.asarray(log_scale)[None], np.asarray(rotation)[None])[0]


@dataclass(frozen=True)
class Gaussian3D:
    """One anisotropic Gaussian primitive."""

    position: np.ndarray
    log_scale: np.ndarray
    rotation: np.ndarray
    opacity_logit: float
    sh_diffuse: np.ndarray
    sh_specular: np.ndarray
    specular_logit: float
    visibility: float = 1.0
    local_light: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def opacity(self) -> float:
        return float(expit(self.opacity_logit))

    @property
    def specular_weight(self) -> float:
        return float(expit(self.specular_logit))

    @property
    def scale(self) -> np.ndarray:
        return scales_from_log(np.asarray(self.log_scale, dtype=np.float64))

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quat_to_rotmat(np.asarray(self.rotation, dtype=np.float64))

    @property
    def covariance(self) -> np.ndarray:
        return build_covariance(self.log_scale, self.rotation)

    @classmethod
    def isotropic(
        cls,
        position: Sequence[float],
        sigma: float = 1.0,
        *,
        opacity: float = 0.5,
        specular_weight: float = 0.1,
        rotation: Sequence[float] = (1.0, 0.0, 0.0, 0.0),
    ) -> "Gaussian3D":
        return cls(
            position=np.asarray(position, dtype=np.float64),
            log_scale=np.full(3, np.log(sigma)),
            rotation=np.asarray(rotation, dtype=np.float64),
            opacity_logit=float(logit(opacity)),
            sh_diffuse=np.zeros((SH_COEFFS, 3)),
            sh_specular=np.zeros((SH_COEFFS, 3)),
            specular_logit=float(logit(specular_weight)),
        )


def gaussian_density(g: Gaussian3D, x: np.ndarray) -> float:
    """exp(-1/2 (x-mu)^T Sigma^-1 (x-mu)); 1 at the mean."""
    raw = np.exp(np.asarray(g.log_scale, dtype=np.float64))
    if np.any(raw <= SCALE_FLOOR):
        raise DegenerateGaussianError(f"scale {raw.tolist()} at or below floor {SCALE_FLOOR}")
    d = np.asarray(x, dtype=np.float64) - np.asarray(g.position, dtype=np.float64)
    local = (g.rotation_matrix.T @ d) / raw
    return float(np.exp(-0.5 * float(local @ local)))


def smallest_axis(scales: np.ndarray) -> np.ndarray:
    """Index of the smallest scale per row; ties within NORMAL_TIE_TOL go to the lower index."""
    scales = np.atleast_2d(scales)
    smin = scales.min(axis=-1, keepdims=True)
    return np.argmax(scales <= smin + NORMAL_TIE_TOL, axis=-1)


def estimate_normals(
    rotmats: np.ndarray,
    scales: np.ndarray,
    positions: np.ndarray,
    view_pos: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shortest principal axis per Gaussian, flipped toward view_pos.

    Returns (normals (N, 3), axis index (N,), sign (N,)).
    """
    axis = smallest_axis(scales)
    rows = np.arange(len(axis))
    raw = rotmats[rows, :, axis]
    facing = np.sum(raw * (np.asarray(view_pos) - positions), axis=-1)
    sign = np.where(facing >= 0.0, 1.0, -1.0)
    return raw * sign[:, None], axis, sign


def estimate_normal(g: Gaussian3D, view_pos: np.ndarray) -> np.ndarray:
    normals, _, _ = estimate_normals(
        g.rotation_matrix[None],
        g.scale[None],
        np.asarray(g.position, dtype=np.float64)[None],
        np.asarray(view_pos, dtype=np.float64),
    )
    return normals[0]


@dataclass
class GaussianCloud:
    """Ordered Gaussians as parallel arrays plus the scene-wide global light."""

    positions: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray
    opacity_logits: np.ndarray
    sh_diffuse: np.ndarray
    sh_specular: np.ndarray
    specular_logits: np.ndarray
    visibility: np.ndarray
    local_light: np.ndarray
    global_light: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self) -> None:
        n = len(self.positions)
        for name, tail in PER_GAUSSIAN_FIELDS:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (n,) + tail:
                raise ValueError(f"{name} must have shape {(n,) + tail}, got {arr.shape}")
            setattr(self, name, arr)
        self.global_light = np.asarray(self.global_light, dtype=np.float64).reshape(3)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self) == 0:
            return np.zeros(3), np.zeros(3)
        return self.positions.min(axis=0), self.positions.max(axis=0)

    @property
    def opacities(self) -> np.ndarray:
        return expit(self.opacity_logits)

    @property
    def specular_weights(self) -> np.ndarray:
        return expit(self.specular_logits)

    @property
    def scales(self) -> np.ndarray:
        return scales_from_log(self.log_scales)

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in FIELD_NAMES}

    def gaussian(self, i: int) -> Gaussian3D:
        return Gaussian3D(
            position=self.positions[i].copy(),
            log_scale=self.log_scales[i].copy(),
            rotation=self.rotations[i].copy(),
            opacity_logit=float(self.opacity_logits[i]),
            sh_diffuse=self.sh_diffuse[i].copy(),
            sh_specular=self.sh_specular[i].copy(),
            specular_logit=float(self.specular_logits[i]),
            visibility=float(self.visibility[i]),
            local_light=self.local_light[i].copy(),
        )

    def __iter__(self):
        return (self.gaussian(i) for i in range(len(self)))

    def copy(self) -> "GaussianCloud":
        return GaussianCloud(
            **{name: arr.copy() for name, arr in self.arrays().items()},
            global_light=self.global_light.copy(),
        )

    def take(self, indices: np.ndarray | Sequence[int]) -> "GaussianCloud":
        idx = np.asarray(indices, dtype=np.int64)
        return GaussianCloud(
            **{name: arr[idx].copy() for name, arr in self.arrays().items()},
            global_light=self.global_light.copy(),
        )

    def concat(self, other: "GaussianCloud") -> "GaussianCloud":
        return GaussianCloud(
            **{name: np.concatenate([getattr(self, name), getattr(other, name)]) for name in FIELD_NAMES},
            global_light=self.global_light.copy(),
        )

    def replace_arrays(self, **arrays: np.ndarray) -> "GaussianCloud":
        data = {name: arr for name, arr in self.arrays().items()}
        global_light = arrays.pop("global_light", self.global_light)
        unknown = set(arrays) - set(data)
        if unknown:
            raise ValueError(f"unknown cloud fields: {sorted(unknown)}")
        data.update(arrays)
        return GaussianCloud(**data, global_light=global_light)

    @classmethod
    def empty(cls, global_light: Sequence[float] = (1.0, 1.0, 1.0)) -> "GaussianCloud":
        return cls(
            **{name: np.zeros((0,) + tail) for name, tail in PER_GAUSSIAN_FIELDS},
            global_light=np.asarray(global_light, dtype=np.float64),
        )

    @classmethod
    def from_gaussians(
        cls,
        gaussians: Iterable[Gaussian3D],
        global_light: Sequence[float] = (1.0, 1.0, 1.0),
    ) -> "GaussianCloud":
        items = list(gaussians)
        if not items:
            return cls.empty(global_light)
        return cls(
            positions=np.stack([g.position for g in items]),
            log_scales=np.stack([g.log_scale for g in items]),
            rotations=np.stack([g.rotation for g in items]),
            opacity_logits=np.array([g.opacity_logit for g in items]),
            sh_diffuse=np.stack([g.sh_diffuse for g in items]),
            sh_specular=np.stack([g.sh_specular for g in items]),
            specular_logits=np.array([g.specular_logit for g in items]),
            visibility=np.array([g.visibility for g in items]),
            local_light=np.stack([g.local_light for g in items]),
            global_light=np.asarray(global_light, dtype=np.float64),
        )


def field_shapes() -> dict[str, tuple[int, ...]]:
    return {name: tail for name, tail in PER_GAUSSIAN_FIELDS}
