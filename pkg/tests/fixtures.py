"""Shared scene builders for the unit tests."""

from __future__ import annotations

import numpy as np

from splatting.camera import Camera
from splatting.scene import GaussianCloud
from splatting.sh import SH_COEFFS


def random_cloud(
    n: int,
    seed: int = 0,
    *,
    spread: float = 1.0,
    center: tuple[float, float, float] = (0.0, 0.0, 0.0),
    log_scale_range: tuple[float, float] = (-3.0, -1.0),
    sh_scale: float = 0.2,
) -> GaussianCloud:
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(n, 4))
    return GaussianCloud(
        positions=np.asarray(center) + rng.uniform(-spread, spread, size=(n, 3)),
        log_scales=rng.uniform(*log_scale_range, size=(n, 3)),
        rotations=q / np.linalg.norm(q, axis=1, keepdims=True),
        opacity_logits=rng.normal(size=n),
        sh_diffuse=rng.normal(scale=sh_scale, size=(n, SH_COEFFS, 3)),
        sh_specular=rng.normal(scale=sh_scale, size=(n, SH_COEFFS, 3)),
        specular_logits=rng.normal(size=n),
        visibility=rng.uniform(0.2, 1.0, size=n),
        local_light=rng.uniform(0.0, 0.2, size=(n, 3)),
    )


def front_camera(size: int = 64, distance: float = 4.0, fov_x_deg: float = 60.0) -> Camera:
    """Camera on the -y axis looking at the origin, world +z up."""
    return Camera.look_at((0.0, -distance, 0.0), (0.0, 0.0, 0.0), width=size, height=size, fov_x_deg=fov_x_deg)


def identity_camera(size: int = 64, focal: float = 100.0) -> Camera:
    """Camera at the origin looking down +z, with the principal point at the image centre."""
    return Camera(
        rotation=np.eye(3),
        translation=np.zeros(3),
        fx=focal,
        fy=focal,
        cx=size / 2.0,
        cy=size / 2.0,
        width=size,
        height=size,
    )
