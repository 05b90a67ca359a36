"""Training loss and its analytic gradient with respect to every trainable cloud parameter.

The reverse pass runs compositing -> (2D kernel, opacity, color) -> EWA projection
-> covariance -> quaternion/scale, and color -> shading -> SH/normal/lighting.
fd_gradient is the finite-difference oracle the analytic path is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from splatting.camera import Camera
from splatting.errors import NonFiniteGradientError
from splatting.metrics import ssim, ssim_with_grad
from splatting.raster import Image, RenderResult, composite_tiles_backward, render, render_with_cache, require_same_size
from splatting.scene import FIELD_NAMES, PER_GAUSSIAN_FIELDS, SCALE_FLOOR, GaussianCloud, quat_to_rotmat_backward
from splatting.shading import ShadingConfig, shade_cloud_backward

DEFAULT_LAMBDA = 0.2
FD_STEP_COARSE = 1e-4
FD_STEP_FINE = 1e-5
COARSE_STEP_FIELDS = frozenset({"positions", "opacity_logits", "specular_logits"})


def loss(rendered: Image, gt: Image, lam: float = DEFAULT_LAMBDA) -> float:
    """(1 - lam) * mean|rendered - gt| + lam * (1 - SSIM)."""
    require_same_size(rendered, gt)
    l1 = float(np.mean(np.abs(rendered.pixels - gt.pixels)))
    if lam == 0.0:
        return l1
    return (1.0 - lam) * l1 + lam * (1.0 - ssim(rendered, gt))


def loss_and_grad(rendered: Image, gt: Image, lam: float = DEFAULT_LAMBDA) -> tuple[float, np.ndarray]:
    """Loss value and dL/d rendered pixels."""
    require_same_size(rendered, gt)
    diff = rendered.pixels - gt.pixels
    l1 = float(np.mean(np.abs(diff)))
    d_pixels = (1.0 - lam) * np.sign(diff) / diff.size
    if lam == 0.0:
        return l1, d_pixels
    s, d_ssim = ssim_with_grad(rendered, gt)
    return (1.0 - lam) * l1 + lam * (1.0 - s), d_pixels - lam * d_ssim


@dataclass
class GradientBundle:
    """Partials for every trainable cloud array; shapes mirror the cloud."""

    positions: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray
    opacity_logits: np.ndarray
    sh_diffuse: np.ndarray
    sh_specular: np.ndarray
    specular_logits: np.ndarray
    visibility: np.ndarray
    local_light: np.ndarray
    global_light: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def zeros(cls, n: int) -> "GradientBundle":
        return cls(**{name: np.zeros((n,) + tail) for name, tail in PER_GAUSSIAN_FIELDS}, global_light=np.zeros(3))

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in FIELD_NAMES:
            yield name, getattr(self, name)
        yield "global_light", self.global_light

    def check_finite(self) -> None:
        for name, arr in self.items():
            bad = int(np.count_nonzero(~np.isfinite(arr)))
            if bad:
                raise NonFiniteGradientError(name, bad)


@dataclass
class BackwardResult:
    loss: float
    grads: GradientBundle
    render: RenderResult
    screen_grad_norms: np.ndarray

    @property
    def visible(self) -> np.ndarray:
        return self.render.projection.indices


def _projection_backward(res: RenderResult, d_means2d: np.ndarray, d_cov2d: np.ndarray, cam: Camera):
    """Chain mean2d/cov2d partials to camera-space position and the 3D covariance."""
    proj = res.projection
    p = proj.p_cam
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    fx, fy = cam.fx, cam.fy
    t = proj.jac @ cam.rotation
    d_cov3d = np.swapaxes(t, -1, -2) @ d_cov2d @ t
    d_t = 2.0 * d_cov2d @ t @ proj.cov3d
    d_jac = d_t @ cam.rotation.T

    z2 = z * z
    z3 = z2 * z
    d_p = np.zeros_like(p)
    d_p[:, 0] = d_means2d[:, 0] * fx / z - d_jac[:, 0, 2] * fx / z2
    d_p[:, 1] = d_means2d[:, 1] * fy / z - d_jac[:, 1, 2] * fy / z2
    d_p[:, 2] = (
        -d_means2d[:, 0] * fx * x / z2
        - d_means2d[:, 1] * fy * y / z2
        - d_jac[:, 0, 0] * fx / z2
        + d_jac[:, 0, 2] * 2.0 * fx * x / z3
        - d_jac[:, 1, 1] * fy / z2
        + d_jac[:, 1, 2] * 2.0 * fy * y / z3
    )
    return d_p @ cam.rotation, d_cov3d


def _covariance_backward(res: RenderResult, cloud: GaussianCloud, d_cov3d: np.ndarray):
    """Chain dL/dSigma to log scales and (unnormalized) quaternions; Sigma = (R S)(R S)^T."""
    proj = res.projection
    idx = proj.indices
    d_sym = 0.5 * (d_cov3d + np.swapaxes(d_cov3d, -1, -2))
    m = proj.rotmats * proj.scales[:, None, :]
    d_m = 2.0 * d_sym @ m
    d_rot = d_m * proj.scales[:, None, :]
    d_scale = np.sum(d_m * proj.rotmats, axis=1)
    live = np.exp(cloud.log_scales[idx]) >= SCALE_FLOOR
    d_log_scale = np.where(live, d_scale * proj.scales, 0.0)
    d_quat = quat_to_rotmat_backward(cloud.rotations[idx], d_rot)
    return d_log_scale, d_quat


def gradients_from_pixels(
    cloud: GaussianCloud,
    cam: Camera,
    res: RenderResult,
    d_pixels: np.ndarray,
    shading_cfg: ShadingConfig,
    threads: int | None = None,
) -> tuple[GradientBundle, np.ndarray]:
    """Reverse pass for an arbitrary dL/dpixels; returns (bundle, screen-space gradient norms per visible Gaussian)."""
    grads = GradientBundle.zeros(len(cloud))
    idx = res.projection.indices
    if len(idx) == 0:
        return grads, np.zeros(0)
    sg = composite_tiles_backward(res.splats, res.grid, res.background, d_pixels, threads)
    d_cov2d = sg.cov2d(res.splats)

    d_pos_cam, d_cov3d = _projection_backward(res, sg.means2d, d_cov2d, cam)
    d_log_scale, d_quat_cov = _covariance_backward(res, cloud, d_cov3d)
    opac = res.projection.opacities
    d_opacity_logit = sg.opacities * opac * (1.0 - opac)

    sh = shade_cloud_backward(cloud, res.shade, shading_cfg, sg.colors)

    grads.positions[idx] = d_pos_cam + sh.positions
    grads.log_scales[idx] = d_log_scale
    grads.rotations[idx] = d_quat_cov + sh.rotations
    grads.opacity_logits[idx] = d_opacity_logit
    grads.sh_diffuse[idx] = sh.sh_diffuse
    grads.sh_specular[idx] = sh.sh_specular
    grads.specular_logits[idx] = sh.specular_logits
    grads.visibility[idx] = sh.visibility
    grads.local_light[idx] = sh.local_light
    grads.global_light = sh.global_light

    # NDC scaling: d/d ndc = d/d pixel * (size / 2)
    screen = sg.means2d * np.array([cam.width / 2.0, cam.height / 2.0])
    return grads, np.linalg.norm(screen, axis=1)


def backward_with_stats(
    cloud: GaussianCloud,
    cam: Camera,
    gt: Image,
    shading_cfg: ShadingConfig,
    lam: float = DEFAULT_LAMBDA,
    background: Sequence[float] = (0.0, 0.0, 0.0),
    threads: int | None = None,
) -> BackwardResult:
    res = render_with_cache(cam, cloud, shading_cfg, background, threads)
    value, d_pixels = loss_and_grad(res.image, gt, lam)
    grads, screen = gradients_from_pixels(cloud, cam, res, d_pixels, shading_cfg, threads)
    return BackwardResult(loss=value, grads=grads, render=res, screen_grad_norms=screen)


def backward(
    cloud: GaussianCloud,
    cam: Camera,
    gt: Image,
    shading_cfg: ShadingConfig,
    lam: float = DEFAULT_LAMBDA,
    background: Sequence[float] = (0.0, 0.0, 0.0),
    threads: int | None = None,
) -> tuple[float, GradientBundle]:
    """Loss value and its analytic gradient bundle."""
    result = backward_with_stats(cloud, cam, gt, shading_cfg, lam, background, threads)
    return result.loss, result.grads


@dataclass(frozen=True)
class ParamRef:
    """One scalar parameter: field name, Gaussian index (ignored for global_light) and component index."""

    field: str
    index: int = 0
    component: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.field not in FIELD_NAMES and self.field != "global_light":
            raise ValueError(f"unknown parameter field {self.field!r}")

    def locate(self, arr: np.ndarray) -> tuple[int, ...]:
        if self.field == "global_light":
            return tuple(self.component)
        return (self.index,) + tuple(self.component)

    def read(self, bundle_or_cloud) -> float:
        arr = getattr(bundle_or_cloud, self.field)
        return float(arr[self.locate(arr)])


def iter_param_refs(cloud: GaussianCloud) -> Iterator[ParamRef]:
    """Every scalar trainable parameter of the cloud, in field order."""
    for name, tail in PER_GAUSSIAN_FIELDS:
        for i in range(len(cloud)):
            for comp in np.ndindex(*tail) if tail else [()]:
                yield ParamRef(name, i, tuple(int(c) for c in comp))
    for c in range(3):
        yield ParamRef("global_light", 0, (c,))


def fd_step(ref: ParamRef) -> float:
    """Central-difference step for one parameter."""
    return FD_STEP_COARSE if ref.field in COARSE_STEP_FIELDS else FD_STEP_FINE


def perturbed(cloud: GaussianCloud, ref: ParamRef, delta: float) -> GaussianCloud:
    out = cloud.copy()
    arr = getattr(out, ref.field)
    arr[ref.locate(arr)] += delta
    return out


def fd_gradient(
    cloud: GaussianCloud,
    cam: Camera,
    gt: Image,
    param_ref: ParamRef,
    h: float,
    shading_cfg: ShadingConfig,
    lam: float = DEFAULT_LAMBDA,
    background: Sequence[float] = (0.0, 0.0, 0.0),
) -> float:
    """(loss(theta + h) - loss(theta - h)) / 2h for one scalar parameter."""
    plus = loss(render(cam, perturbed(cloud, param_ref, h), shading_cfg, background, threads=1), gt, lam)
    minus = loss(render(cam, perturbed(cloud, param_ref, -h), shading_cfg, background, threads=1), gt, lam)
    return (plus - minus) / (2.0 * h)
