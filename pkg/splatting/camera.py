"""Pinhole camera, world-to-camera transform and EWA projection of Gaussians to splats.

Camera space follows the usual vision convention: +x right, +y down, +z forward.
Pixel (x, y) has its centre at integer coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from splatting.errors import InvalidCameraError
from splatting.scene import Gaussian3D, GaussianCloud, build_covariances, quat_to_rotmat, scales_from_log

DILATION = 0.3
GUARD_BAND = 1.3
ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class Camera:
    """Intrinsics plus world-to-camera pose (p_cam = R p + t)."""

    rotation: np.ndarray
    translation: np.ndarray
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 0.01
    far: float = 100.0

    def __post_init__(self) -> None:
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        trans = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)
        drift = float(np.max(np.abs(rot @ rot.T - np.eye(3))))
        if drift > ORTHO_TOL:
            raise InvalidCameraError(f"rotation is not orthonormal (max drift {drift:.3g})")
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidCameraError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (0 < self.near < self.far):
            raise InvalidCameraError(f"need 0 < near < far, got near={self.near} far={self.far}")
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise InvalidCameraError(f"resolution must be positive, got {self.width}x{self.height}")

    @property
    def center(self) -> np.ndarray:
        """Camera position in world space, -R^T t."""
        return -self.rotation.T @ self.translation

    @property
    def resolution(self) -> tuple[int, int]:
        return int(self.width), int(self.height)

    @property
    def world_to_cam(self) -> np.ndarray:
        """3x4 [R | t]."""
        return np.hstack([self.rotation, self.translation[:, None]])

    @classmethod
    def from_matrix(cls, world_to_cam: np.ndarray, **intrinsics) -> "Camera":
        m = np.asarray(world_to_cam, dtype=np.float64).reshape(3, 4)
        return cls(rotation=m[:, :3], translation=m[:, 3], **intrinsics)

    @classmethod
    def look_at(
        cls,
        eye: Sequence[float],
        target: Sequence[float],
        up: Sequence[float] = (0.0, 0.0, 1.0),
        *,
        width: int = 64,
        height: int = 64,
        fov_x_deg: float = 60.0,
        near: float = 0.01,
        far: float = 100.0,
    ) -> "Camera":
        """Camera at eye looking at target, with image -y aligned to world up."""
        eye = np.asarray(eye, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-9:
            raise InvalidCameraError("up vector is parallel to the viewing direction")
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        rot = np.stack([right, down, forward])
        focal = 0.5 * width / np.tan(np.radians(fov_x_deg) / 2.0)
        return cls(
            rotation=rot,
            translation=-rot @ eye,
            fx=float(focal),
            fy=float(focal),
            cx=(width - 1) / 2.0,
            cy=(height - 1) / 2.0,
            width=width,
            height=height,
            near=near,
            far=far,
        )


def world_to_camera(cam: Camera, p: np.ndarray) -> np.ndarray:
    """R p + t; accepts (3,) or (N, 3)."""
    return np.asarray(p, dtype=np.float64) @ cam.rotation.T + cam.translation


def _jacobians(fx: float, fy: float, p_cam: np.ndarray) -> np.ndarray:
    x, y, z = p_cam[..., 0], p_cam[..., 1], p_cam[..., 2]
    jac = np.zeros(p_cam.shape[:-1] + (2, 3), dtype=np.float64)
    jac[..., 0, 0] = fx / z
    jac[..., 0, 2] = -fx * x / (z * z)
    jac[..., 1, 1] = fy / z
    jac[..., 1, 2] = -fy * y / (z * z)
    return jac


def projection_jacobian(cam: Camera, p_cam: np.ndarray) -> np.ndarray | None:
    """Jacobian of the pinhole map at p_cam, or None when p_cam is in front of the near plane."""
    p_cam = np.asarray(p_cam, dtype=np.float64)
    if p_cam[2] < cam.near:
        return None
    return _jacobians(cam.fx, cam.fy, p_cam)


def project_points(cam: Camera, p_cam: np.ndarray) -> np.ndarray:
    """Pinhole projection of camera-space points to pixel coordinates."""
    z = p_cam[..., 2]
    return np.stack([cam.fx * p_cam[..., 0] / z + cam.cx, cam.fy * p_cam[..., 1] / z + cam.cy], axis=-1)


def visible_mask(cam: Camera, p_cam: np.ndarray) -> np.ndarray:
    """Depth inside (near, far) and projected mean within the guard band around the principal point."""
    z = p_cam[..., 2]
    in_depth = (z > cam.near) & (z < cam.far)
    safe_z = np.where(in_depth, z, 1.0)
    means = project_points(cam, np.concatenate([p_cam[..., :2], safe_z[..., None]], axis=-1))
    half_diag = 0.5 * np.hypot(cam.width, cam.height)
    offset = np.hypot(means[..., 0] - cam.cx, means[..., 1] - cam.cy)
    return in_depth & (offset <= GUARD_BAND * half_diag)


@dataclass(frozen=True)
class Splat2D:
    """One projected Gaussian."""

    mean2d: np.ndarray
    cov2d: np.ndarray
    depth: float
    color: np.ndarray
    opacity: float
    source_index: int


@dataclass
class SplatBatch:
    """Splats as parallel arrays; rows follow ascending source_index unless re-sorted."""

    means2d: np.ndarray
    cov2d: np.ndarray
    depths: np.ndarray
    colors: np.ndarray
    opacities: np.ndarray
    source_indices: np.ndarray

    def __len__(self) -> int:
        return len(self.depths)

    @property
    def conics(self) -> np.ndarray:
        """Inverse 2D covariances, (M, 2, 2)."""
        return np.linalg.inv(self.cov2d) if len(self) else np.zeros((0, 2, 2))

    @property
    def radii(self) -> np.ndarray:
        """3 sigma along the major axis, 3 * sqrt(lambda_max(cov2d))."""
        a = self.cov2d[:, 0, 0]
        b = self.cov2d[:, 0, 1]
        c = self.cov2d[:, 1, 1]
        mid = 0.5 * (a + c)
        lam_max = mid + np.sqrt(np.maximum(mid * mid - (a * c - b * b), 0.0))
        return 3.0 * np.sqrt(lam_max)

    def splat(self, i: int) -> Splat2D:
        return Splat2D(
            mean2d=self.means2d[i].copy(),
            cov2d=self.cov2d[i].copy(),
            depth=float(self.depths[i]),
            color=self.colors[i].copy(),
            opacity=float(self.opacities[i]),
            source_index=int(self.source_indices[i]),
        )

    def to_splats(self) -> list[Splat2D]:
        return [self.splat(i) for i in range(len(self))]

    @classmethod
    def from_splats(cls, splats: Sequence[Splat2D]) -> "SplatBatch":
        if not splats:
            return cls(
                means2d=np.zeros((0, 2)),
                cov2d=np.zeros((0, 2, 2)),
                depths=np.zeros(0),
                colors=np.zeros((0, 3)),
                opacities=np.zeros(0),
                source_indices=np.zeros(0, dtype=np.int64),
            )
        return cls(
            means2d=np.stack([np.asarray(s.mean2d, dtype=np.float64) for s in splats]),
            cov2d=np.stack([np.asarray(s.cov2d, dtype=np.float64) for s in splats]),
            depths=np.array([s.depth for s in splats], dtype=np.float64),
            colors=np.stack([np.asarray(s.color, dtype=np.float64) for s in splats]),
            opacities=np.array([s.opacity for s in splats], dtype=np.float64),
            source_indices=np.array([s.source_index for s in splats], dtype=np.int64),
        )


@dataclass
class Projection:
    """Forward intermediates of projecting the visible part of a cloud; reused by the backward pass."""

    indices: np.ndarray
    p_cam: np.ndarray
    jac: np.ndarray
    cov3d: np.ndarray
    rotmats: np.ndarray
    scales: np.ndarray
    means2d: np.ndarray
    cov2d: np.ndarray
    opacities: np.ndarray

    @property
    def depths(self) -> np.ndarray:
        return self.p_cam[:, 2]

    def splats(self, colors: np.ndarray) -> SplatBatch:
        """Attach per-visible-Gaussian colors, (M, 3)."""
        return SplatBatch(
            means2d=self.means2d,
            cov2d=self.cov2d,
            depths=self.depths.copy(),
            colors=np.asarray(colors, dtype=np.float64),
            opacities=self.opacities,
            source_indices=self.indices,
        )


def project_cloud(cam: Camera, cloud: GaussianCloud) -> Projection:
    """Cull and project every Gaussian; the result keeps cloud order."""
    p_cam_all = world_to_camera(cam, cloud.positions) if len(cloud) else np.zeros((0, 3))
    idx = np.flatnonzero(visible_mask(cam, p_cam_all))
    p_cam = p_cam_all[idx]
    rotmats = quat_to_rotmat(cloud.rotations[idx]) if len(idx) else np.zeros((0, 3, 3))
    scales = scales_from_log(cloud.log_scales[idx])
    cov3d = build_covariances(cloud.log_scales[idx], cloud.rotations[idx]) if len(idx) else np.zeros((0, 3, 3))
    jac = _jacobians(cam.fx, cam.fy, p_cam)
    t = jac @ cam.rotation
    cov2d = t @ cov3d @ np.swapaxes(t, -1, -2)
    cov2d = 0.5 * (cov2d + np.swapaxes(cov2d, -1, -2))
    cov2d[:, 0, 0] += DILATION
    cov2d[:, 1, 1] += DILATION
    return Projection(
        indices=idx.astype(np.int64),
        p_cam=p_cam,
        jac=jac,
        cov3d=cov3d,
        rotmats=rotmats,
        scales=scales,
        means2d=project_points(cam, p_cam) if len(idx) else np.zeros((0, 2)),
        cov2d=cov2d,
        opacities=cloud.opacities[idx],
    )


def project_gaussian(cam: Camera, g: Gaussian3D, shaded_color: np.ndarray, source_index: int = 0) -> Splat2D | None:
    """Splat2D for one Gaussian, or None when it is culled."""
    proj = project_cloud(cam, GaussianCloud.from_gaussians([g]))
    if len(proj.indices) == 0:
        return None
    return Splat2D(
        mean2d=proj.means2d[0],
        cov2d=proj.cov2d[0],
        depth=float(proj.p_cam[0, 2]),
        color=np.asarray(shaded_color, dtype=np.float64),
        opacity=float(proj.opacities[0]),
        source_index=source_index,
    )


def frustum_cull(cam: Camera, cloud: GaussianCloud) -> list[int]:
    """Indices of Gaussians that survive culling, in cloud order."""
    if len(cloud) == 0:
        return []
    return np.flatnonzero(visible_mask(cam, world_to_camera(cam, cloud.positions))).tolist()
