"""Light-decomposition shading: per-Gaussian diffuse/specular SH blend under a simple incident light.

Outgoing color of one Gaussian:

    c0    = (1 - a) * shc_d * cos_theta + a * shc_s
    c_in  = V * L_global + L_local
    color = clamp(c0 * c_in, 0, 1)

shc_d is the diffuse SH set evaluated at the view direction, shc_s the specular
set evaluated at the view direction mirrored about the Gaussian normal. Both carry
the +0.5 offset, so zero coefficients give mid-gray.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from splatting.errors import NonUnitDirectionError
from splatting.scene import (
    Gaussian3D,
    GaussianCloud,
    estimate_normal,
    estimate_normals,
    quat_to_rotmat,
    quat_to_rotmat_backward,
    scales_from_log,
)
from splatting.sh import SH_DEGREE, UNIT_TOL, eval_sh, sh_basis, sh_basis_jacobian

SH_OFFSET = 0.5


class ShadingMode(str, enum.Enum):
    FULL = "full"
    DIFFUSE_ONLY = "diffuse_only"
    SPECULAR_ONLY = "specular_only"
    BASELINE_SH = "baseline_sh"


@dataclass(frozen=True)
class ShadingConfig:
    mode: ShadingMode = ShadingMode.FULL
    light_direction: tuple[float, float, float] | None = None
    sh_degree: int = SH_DEGREE

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", ShadingMode(self.mode))
        if self.light_direction is not None:
            light = tuple(float(v) for v in self.light_direction)
            if len(light) != 3:
                raise NonUnitDirectionError(f"light_direction needs 3 components, got {len(light)}")
            norm = float(np.linalg.norm(light))
            if abs(norm - 1.0) > UNIT_TOL:
                raise NonUnitDirectionError(f"light_direction must be unit length, got |l|={norm!r}")
            object.__setattr__(self, "light_direction", light)
        if not 0 <= int(self.sh_degree) <= SH_DEGREE:
            raise ValueError(f"sh_degree must be in [0, {SH_DEGREE}], got {self.sh_degree}")


def incident_light(visibility: float | np.ndarray, global_light: np.ndarray, local_light: np.ndarray) -> np.ndarray:
    """V * L_global + L_local, componentwise."""
    v = np.asarray(visibility, dtype=np.float64)
    return v[..., None] * np.asarray(global_light, dtype=np.float64) + np.asarray(local_light, dtype=np.float64)


def compose_color(
    shc_d: np.ndarray,
    shc_s: np.ndarray,
    a: float | np.ndarray,
    cos_theta: float | np.ndarray,
) -> np.ndarray:
    """(1 - a) * shc_d * cos_theta + a * shc_s; not clamped."""
    a = np.asarray(a, dtype=np.float64)[..., None]
    cos_theta = np.asarray(cos_theta, dtype=np.float64)[..., None]
    return (1.0 - a) * np.asarray(shc_d, dtype=np.float64) * cos_theta + a * np.asarray(shc_s, dtype=np.float64)


def reflect(d: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Mirror d about the plane with normal n: d - 2 (d.n) n."""
    d = np.asarray(d, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    return d - 2.0 * np.sum(d * n, axis=-1, keepdims=True) * n


def _mode_blend(mode: ShadingMode, shc_d, shc_s, a, cos_theta) -> np.ndarray:
    if mode is ShadingMode.FULL:
        return compose_color(shc_d, shc_s, a, cos_theta)
    if mode is ShadingMode.DIFFUSE_ONLY:
        return shc_d * np.asarray(cos_theta)[..., None]
    if mode is ShadingMode.SPECULAR_ONLY:
        return np.array(shc_s, dtype=np.float64)
    return np.array(shc_d, dtype=np.float64)


def shade_gaussian(
    g: Gaussian3D,
    global_light: np.ndarray,
    view_pos: np.ndarray,
    cfg: ShadingConfig,
) -> np.ndarray:
    """Color of one Gaussian seen from view_pos, in [0, 1]^3."""
    diff = np.asarray(view_pos, dtype=np.float64) - np.asarray(g.position, dtype=np.float64)
    omega = diff / np.linalg.norm(diff)
    normal = estimate_normal(g, view_pos)
    light = np.asarray(cfg.light_direction) if cfg.light_direction is not None else omega
    cos_theta = float(np.clip(light @ normal, 0.0, 1.0))
    shc_d = eval_sh(g.sh_diffuse, omega, cfg.sh_degree) + SH_OFFSET
    mirrored = reflect(-omega, normal)
    shc_s = eval_sh(g.sh_specular, mirrored, cfg.sh_degree) + SH_OFFSET
    c0 = _mode_blend(cfg.mode, shc_d, shc_s, g.specular_weight, cos_theta)
    incident = incident_light(g.visibility, global_light, g.local_light)
    return np.clip(c0 * incident, 0.0, 1.0)


@dataclass
class ShadeCache:
    """Forward intermediates of shade_cloud for the Gaussians listed in indices."""

    indices: np.ndarray
    view_pos: np.ndarray
    dist: np.ndarray
    omega: np.ndarray
    rotmats: np.ndarray
    normals: np.ndarray
    normal_axis: np.ndarray
    normal_sign: np.ndarray
    light: np.ndarray
    cos_raw: np.ndarray
    cos_theta: np.ndarray
    mirrored: np.ndarray
    basis_d: np.ndarray
    basis_s: np.ndarray
    shc_d: np.ndarray
    shc_s: np.ndarray
    spec_weight: np.ndarray
    c0: np.ndarray
    incident: np.ndarray
    raw: np.ndarray

    @property
    def dc0_da(self) -> np.ndarray:
        """Partial of the blended color w.r.t. the specular weight: shc_s - shc_d * cos_theta."""
        return self.shc_s - self.shc_d * self.cos_theta[:, None]


def shade_cloud(
    cloud: GaussianCloud,
    view_pos: np.ndarray,
    cfg: ShadingConfig,
    indices: np.ndarray | Sequence[int] | None = None,
) -> tuple[np.ndarray, ShadeCache]:
    """Colors (M, 3) for cloud[indices] (all Gaussians when indices is None)."""
    idx = np.arange(len(cloud)) if indices is None else np.asarray(indices, dtype=np.int64)
    view_pos = np.asarray(view_pos, dtype=np.float64)
    pos = cloud.positions[idx]
    diff = view_pos - pos
    dist = np.linalg.norm(diff, axis=-1)
    omega = diff / dist[:, None]
    rotmats = quat_to_rotmat(cloud.rotations[idx]) if len(idx) else np.zeros((0, 3, 3))
    normals, axis, sign = estimate_normals(rotmats, scales_from_log(cloud.log_scales[idx]), pos, view_pos)
    if cfg.light_direction is not None:
        light = np.broadcast_to(np.asarray(cfg.light_direction, dtype=np.float64), omega.shape)
    else:
        light = omega
    cos_raw = np.sum(light * normals, axis=-1)
    cos_theta = np.clip(cos_raw, 0.0, 1.0)
    mirrored = reflect(-omega, normals)
    basis_d = sh_basis(omega, cfg.sh_degree)
    basis_s = sh_basis(mirrored, cfg.sh_degree)
    shc_d = np.einsum("nk,nkc->nc", basis_d, cloud.sh_diffuse[idx]) + SH_OFFSET
    shc_s = np.einsum("nk,nkc->nc", basis_s, cloud.sh_specular[idx]) + SH_OFFSET
    spec_weight = expit(cloud.specular_logits[idx])
    c0 = _mode_blend(cfg.mode, shc_d, shc_s, spec_weight, cos_theta)
    incident = incident_light(cloud.visibility[idx], cloud.global_light, cloud.local_light[idx])
    raw = c0 * incident
    cache = ShadeCache(
        indices=idx,
        view_pos=view_pos,
        dist=dist,
        omega=omega,
        rotmats=rotmats,
        normals=normals,
        normal_axis=axis,
        normal_sign=sign,
        light=light,
        cos_raw=cos_raw,
        cos_theta=cos_theta,
        mirrored=mirrored,
        basis_d=basis_d,
        basis_s=basis_s,
        shc_d=shc_d,
        shc_s=shc_s,
        spec_weight=spec_weight,
        c0=c0,
        incident=incident,
        raw=raw,
    )
    return np.clip(raw, 0.0, 1.0), cache


@dataclass
class ShadeGrads:
    """Partials produced by shade_cloud_backward, rows aligned with ShadeCache.indices."""

    positions: np.ndarray
    rotations: np.ndarray
    sh_diffuse: np.ndarray
    sh_specular: np.ndarray
    specular_logits: np.ndarray
    visibility: np.ndarray
    local_light: np.ndarray
    global_light: np.ndarray


def shade_cloud_backward(
    cloud: GaussianCloud,
    cache: ShadeCache,
    cfg: ShadingConfig,
    d_color: np.ndarray,
) -> ShadeGrads:
    """Chain dL/dcolor (M, 3) back to the Gaussian parameters.

    Clamped color channels and clamped cosines pass no gradient. The normal is the
    signed shortest principal axis, so it only depends on the rotation.
    """
    idx = cache.indices
    mode = cfg.mode
    inside = (cache.raw > 0.0) & (cache.raw < 1.0)
    g_raw = np.where(inside, d_color, 0.0)
    d_c0 = g_raw * cache.incident
    d_incident = g_raw * cache.c0

    d_visibility = np.sum(d_incident * cloud.global_light, axis=-1)
    d_global = np.sum(d_incident * cloud.visibility[idx][:, None], axis=0)
    d_local = d_incident

    a = cache.spec_weight
    cos_theta = cache.cos_theta
    zeros3 = np.zeros_like(d_c0)
    d_spec_weight = np.zeros(len(idx))
    d_cos = np.zeros(len(idx))
    if mode is ShadingMode.FULL:
        d_shc_d = d_c0 * ((1.0 - a) * cos_theta)[:, None]
        d_shc_s = d_c0 * a[:, None]
        d_spec_weight = np.sum(d_c0 * cache.dc0_da, axis=-1)
        d_cos = np.sum(d_c0 * cache.shc_d, axis=-1) * (1.0 - a)
    elif mode is ShadingMode.DIFFUSE_ONLY:
        d_shc_d = d_c0 * cos_theta[:, None]
        d_shc_s = zeros3
        d_cos = np.sum(d_c0 * cache.shc_d, axis=-1)
    elif mode is ShadingMode.SPECULAR_ONLY:
        d_shc_d = zeros3
        d_shc_s = d_c0
    else:
        d_shc_d = d_c0
        d_shc_s = zeros3

    d_sh_diffuse = cache.basis_d[:, :, None] * d_shc_d[:, None, :]
    d_sh_specular = cache.basis_s[:, :, None] * d_shc_s[:, None, :]
    d_spec_logit = d_spec_weight * a * (1.0 - a)

    # directions: SH basis polynomials, then the reflection and the cosine
    jac_d = sh_basis_jacobian(cache.omega, cfg.sh_degree)
    jac_s = sh_basis_jacobian(cache.mirrored, cfg.sh_degree)
    dy_d = np.einsum("nc,nkc->nk", d_shc_d, cloud.sh_diffuse[idx])
    dy_s = np.einsum("nc,nkc->nk", d_shc_s, cloud.sh_specular[idx])
    d_omega = np.einsum("nk,nkj->nj", dy_d, jac_d)
    d_mirror = np.einsum("nk,nkj->nj", dy_s, jac_s)

    n = cache.normals
    w = cache.omega
    n_dot_dr = np.sum(n * d_mirror, axis=-1, keepdims=True)
    w_dot_n = np.sum(w * n, axis=-1, keepdims=True)
    # r = -w + 2 (w.n) n
    d_omega = d_omega - d_mirror + 2.0 * n * n_dot_dr
    d_normal = 2.0 * n_dot_dr * w + 2.0 * w_dot_n * d_mirror

    cos_live = (cache.cos_raw > 0.0) & (cache.cos_raw < 1.0)
    d_cos = np.where(cos_live, d_cos, 0.0)
    d_normal = d_normal + d_cos[:, None] * cache.light
    if cfg.light_direction is None:
        d_omega = d_omega + d_cos[:, None] * n

    radial = np.sum(w * d_omega, axis=-1, keepdims=True)
    d_positions = -(d_omega - radial * w) / cache.dist[:, None]

    d_rot = np.zeros((len(idx), 3, 3))
    rows = np.arange(len(idx))
    d_rot[rows, :, cache.normal_axis] = d_normal * cache.normal_sign[:, None]
    d_rotations = quat_to_rotmat_backward(cloud.rotations[idx], d_rot) if len(idx) else np.zeros((0, 4))

    return ShadeGrads(
        positions=d_positions,
        rotations=d_rotations,
        sh_diffuse=d_sh_diffuse,
        sh_specular=d_sh_specular,
        specular_logits=d_spec_logit,
        visibility=d_visibility,
        local_light=d_local,
        global_light=d_global,
    )
