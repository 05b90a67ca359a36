"""Deterministic synthetic scenes with ground-truth views.

Every scene has a generator cloud (``truth``), a perturbed copy to start
training from (``cloud``), a ring of cameras, and ground-truth images rendered
from ``truth`` by the untiled reference renderer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import logit

from splatting.camera import Camera
from splatting.raster import Image, render_reference
from splatting.scene import GaussianCloud
from splatting.sh import SH_COEFFS, rgb_to_sh0
from splatting.shading import ShadingConfig

RING_VIEWS = 8
IMAGE_SIZE = 64
SHELL_RADIUS = 1.0
SHELL_POINTS = 400
SHELL_SIGMA = 0.05
SHELL_THICKNESS = 0.4
GRID_SIDE = 4
GRID_SPACING = 0.4
PLANE_COLS = 5
PLANE_ROWS = 4
PLANE_SPACING = 0.35
MIRROR_LIGHT = (0.3, 0.2, 0.9)
INIT_JITTER = 0.01


class SyntheticKind(str, enum.Enum):
    SHELL = "shell"
    GRID = "grid"
    MIRROR_LIT = "mirror_lit"


@dataclass
class SyntheticScene:
    kind: SyntheticKind
    seed: int
    truth: GaussianCloud
    cloud: GaussianCloud
    views: list[tuple[Camera, Image]]
    shading: ShadingConfig

    @property
    def cameras(self) -> list[Camera]:
        return [cam for cam, _ in self.views]


def ring_cameras(
    radius: float,
    height: float,
    count: int = RING_VIEWS,
    size: int = IMAGE_SIZE,
    target: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> list[Camera]:
    """count cameras evenly spaced on a horizontal circle, all looking at target."""
    cams = []
    for k in range(count):
        phi = 2.0 * np.pi * k / count
        eye = (radius * np.cos(phi), radius * np.sin(phi), height)
        cams.append(Camera.look_at(eye, target, width=size, height=size))
    return cams


def _cloud(
    positions: np.ndarray,
    log_scales: np.ndarray,
    rotations: np.ndarray,
    opacity: np.ndarray,
    colors: np.ndarray,
    specular: float,
) -> GaussianCloud:
    n = len(positions)
    sh_diffuse = np.zeros((n, SH_COEFFS, 3))
    sh_diffuse[:, 0, :] = rgb_to_sh0(colors)
    return GaussianCloud(
        positions=positions,
        log_scales=log_scales,
        rotations=rotations,
        opacity_logits=logit(opacity),
        sh_diffuse=sh_diffuse,
        sh_specular=np.zeros((n, SH_COEFFS, 3)),
        specular_logits=np.full(n, logit(specular)),
        visibility=np.ones(n),
        local_light=np.zeros((n, 3)),
    )


def _random_quaternions(rng: np.random.Generator, n: int) -> np.ndarray:
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return q * np.where(q[:, :1] < 0.0, -1.0, 1.0)


def _shell(rng: np.random.Generator) -> GaussianCloud:
    # golden-angle spiral, randomly rotated; each disc lies tangent to the sphere
    k = np.arange(SHELL_POINTS) + 0.5
    polar = np.arccos(1.0 - 2.0 * k / SHELL_POINTS)
    azimuth = np.pi * (1.0 + 5.0**0.5) * k + rng.uniform(0.0, 2.0 * np.pi)
    dirs = np.stack([np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth), np.cos(polar)], axis=1)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    # shortest-arc rotation taking local +z onto the outward normal
    rotations = np.stack([1.0 + dirs[:, 2], -dirs[:, 1], dirs[:, 0], np.zeros(SHELL_POINTS)], axis=1)
    rotations /= np.linalg.norm(rotations, axis=1, keepdims=True)
    return _cloud(
        positions=SHELL_RADIUS * dirs,
        log_scales=np.tile(np.log([SHELL_SIGMA, SHELL_SIGMA, SHELL_THICKNESS * SHELL_SIGMA]), (SHELL_POINTS, 1)),
        rotations=rotations,
        opacity=np.full(SHELL_POINTS, 0.8),
        colors=rng.uniform(0.2, 0.9, size=(SHELL_POINTS, 3)),
        specular=0.1,
    )


def _grid(rng: np.random.Generator) -> GaussianCloud:
    axis = (np.arange(GRID_SIDE) - (GRID_SIDE - 1) / 2.0) * GRID_SPACING
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    positions = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    n = len(positions)
    return _cloud(
        positions=positions,
        log_scales=np.log(rng.uniform(0.04, 0.12, size=(n, 3))),
        rotations=_random_quaternions(rng, n),
        opacity=rng.uniform(0.5, 0.95, size=n),
        colors=rng.uniform(0.0, 1.0, size=(n, 3)),
        specular=0.1,
    )


def _mirror_plane(rng: np.random.Generator) -> GaussianCloud:
    xs = (np.arange(PLANE_COLS) - (PLANE_COLS - 1) / 2.0) * PLANE_SPACING
    ys = (np.arange(PLANE_ROWS) - (PLANE_ROWS - 1) / 2.0) * PLANE_SPACING
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    n = gx.size
    positions = np.stack([gx.ravel(), gy.ravel(), np.zeros(n)], axis=1)
    log_scales = np.tile(np.log([0.2, 0.2, 0.01]), (n, 1))
    rotations = np.zeros((n, 4))
    rotations[:, 0] = 1.0
    cloud = _cloud(
        positions=positions,
        log_scales=log_scales,
        rotations=rotations,
        opacity=np.full(n, 0.9),
        colors=rng.uniform(0.2, 0.4, size=(n, 3)),
        specular=0.9,
    )
    # specular lobe brightest when the mirrored view direction points along +z
    cloud.sh_specular[:, 2, :] = 1.0
    cloud.sh_specular[:, 0, :] = rng.uniform(-0.3, 0.0, size=(n, 3))
    return cloud


def perturb(truth: GaussianCloud, rng: np.random.Generator, jitter: float = INIT_JITTER) -> GaussianCloud:
    """Starting cloud: positions and log-scales nudged, colours and specular lobes pulled toward neutral."""
    cloud = truth.copy()
    n = len(cloud)
    cloud.positions = cloud.positions + rng.normal(scale=jitter, size=(n, 3))
    cloud.log_scales = cloud.log_scales + rng.normal(scale=0.05, size=(n, 3))
    cloud.sh_diffuse = 0.5 * cloud.sh_diffuse
    cloud.sh_specular = 0.5 * cloud.sh_specular
    cloud.specular_logits = np.zeros(n)
    return cloud


def make_synthetic(kind: SyntheticKind | str, seed: int = 0) -> SyntheticScene:
    """Same kind and seed always give bit-identical scenes."""
    kind = SyntheticKind(kind)
    rng = np.random.default_rng(seed)
    if kind is SyntheticKind.SHELL:
        truth = _shell(rng)
        cams = ring_cameras(radius=3.5, height=1.0)
        shading = ShadingConfig()
    elif kind is SyntheticKind.GRID:
        truth = _grid(rng)
        cams = ring_cameras(radius=3.0, height=0.8)
        shading = ShadingConfig()
    else:
        truth = _mirror_plane(rng)
        cams = ring_cameras(radius=2.0, height=1.5)
        light = np.asarray(MIRROR_LIGHT) / np.linalg.norm(MIRROR_LIGHT)
        shading = ShadingConfig(light_direction=tuple(float(v) for v in light))
    views = [(cam, render_reference(cam, truth, shading)) for cam in cams]
    return SyntheticScene(kind=kind, seed=seed, truth=truth, cloud=perturb(truth, rng), views=views, shading=shading)
