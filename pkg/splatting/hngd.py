"""Hierarchical normal-gradient densification layered on the baseline clone/split/prune schedule.

The cloud is splatted into a voxel density grid V. Per interior voxel:

    G_xyz  = (V[x+1]-V[x-1], V[y+1]-V[y-1], V[z+1]-V[z-1])      index-unit central differences
    N      = G_xyz / |G_xyz|                                     FLAT when |G_xyz| <= EPS_GRAD
    G_norm = |(|N[x+1]-N|, |N[y+1]-N|, |N[z+1]-N|)|              9 components, FLAT neighbours drop out
    Grad   = (1 - omega) |G_xyz| / denom_geo + omega G_norm / denom_norm

Each Gaussian accumulates Grad at its containing voxel over a densify interval. The
accumulated value picks a hierarchy level on the threshold ladder, and a Gaussian
whose level rises is halved that many extra times.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from splatting.app_logging import get_logger
from splatting.errors import BoundaryIndexError, ConfigError, EmptyCloudError
from splatting.scene import Gaussian3D, GaussianCloud, quat_to_rotmat, scales_from_log

logger = get_logger(__name__)

THRESHOLD_LADDER = (1.0, 1.5, 2.0, 2.5, 3.0, 3.5)
DENSE_STEP = 0.5
EPS_GRAD = 1e-12
DENOM_FLOOR = 1e-12
GRID_PAD = 3
MIN_GRID_DIM = 4
TRUNCATION_SIGMAS = 3.0
DENSITY_BLOCK = 1 << 20
SPLIT_SCALE_SHRINK = 1.6
SPLIT_OFFSET_SIGMAS = 0.5


class Strategy(str, enum.Enum):
    NONE = "none"
    SPARSE = "sparse"
    DENSE = "dense"


@dataclass(frozen=True)
class DensifyConfig:
    omega: float = 0.5
    thresholds: tuple[float, ...] = THRESHOLD_LADDER
    strategy: Strategy = Strategy.DENSE
    grid_resolution: int = 128
    densify_interval: int = 100
    clone_grad_threshold: float = 2e-4
    prune_opacity: float = 0.005
    percent_dense: float = 0.01
    hngd_sample_interval: int = 25
    level_cap: int = 8
    max_gaussians: int = 200_000

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if not 0.0 <= self.omega <= 1.0:
            raise ConfigError(f"omega must be in [0, 1], got {self.omega}")
        if not self.thresholds:
            raise ConfigError("thresholds must not be empty")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ConfigError(f"thresholds must be strictly increasing, got {list(self.thresholds)}")
        for name in ("grid_resolution", "densify_interval", "hngd_sample_interval", "level_cap", "max_gaussians"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("clone_grad_threshold", "prune_opacity", "percent_dense"):
            if float(getattr(self, name)) < 0.0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def samples_per_interval(self) -> int:
        return max(1, self.densify_interval // self.hngd_sample_interval)


@dataclass
class DensityGrid:
    """Scalar density on a regular grid; voxel (i, j, k) centre is origin + (index + 0.5) * voxel_size."""

    origin: np.ndarray
    voxel_size: float
    values: np.ndarray

    def __post_init__(self) -> None:
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3 or min(self.values.shape) < MIN_GRID_DIM:
            raise ValueError(f"grid needs at least {MIN_GRID_DIM} voxels per axis, got {self.values.shape}")
        if self.voxel_size <= 0.0:
            raise ValueError(f"voxel_size must be positive, got {self.voxel_size}")

    @property
    def dims(self) -> tuple[int, int, int]:
        nx, ny, nz = self.values.shape
        return nx, ny, nz

    def centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.dims[axis]) + 0.5) * self.voxel_size

    def voxel_of(self, points: np.ndarray) -> np.ndarray:
        """Containing voxel index per point, clipped to the grid."""
        idx = np.floor((np.asarray(points, dtype=np.float64) - self.origin) / self.voxel_size).astype(np.int64)
        return np.clip(idx, 0, np.array(self.dims) - 1)

    def is_interior(self, idx: Sequence[int]) -> bool:
        return all(1 <= int(i) <= n - 2 for i, n in zip(idx, self.dims))


def _grid_frame(cloud: GaussianCloud, resolution: int) -> tuple[np.ndarray, float, tuple[int, int, int]]:
    lo, hi = cloud.bbox
    extent = hi - lo
    edge = float(extent.max())
    if edge <= EPS_GRAD:
        edge = 6.0 * float(cloud.scales.max())
    voxel = edge / resolution
    dims = tuple(max(MIN_GRID_DIM, int(math.ceil(e / voxel - 1e-9)) + 2 * GRID_PAD) for e in extent)
    return lo - GRID_PAD * voxel, voxel, dims


def _mahalanobis_sq(d: np.ndarray, rotmats: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Squared Mahalanobis distances (B, M) for offsets d (B, M, 3) from B means."""
    local = np.einsum("bmi,bij->bmj", d, rotmats) / scales[:, None, :]
    return np.sum(local * local, axis=-1)


def _splat_windows(
    positions: np.ndarray,
    rotmats: np.ndarray,
    scales: np.ndarray,
    weights: np.ndarray,
    origin: np.ndarray,
    voxel: float,
    dims: tuple[int, int, int],
) -> np.ndarray:
    """Each Gaussian on the voxel cube around its mean that holds its truncation ellipsoid.

    Gaussians sharing a cube size are evaluated together, DENSITY_BLOCK voxel
    evaluations at a time.
    """
    dims_arr = np.array(dims)
    flat = np.zeros(int(np.prod(dims_arr)))
    centre = np.clip(np.floor((positions - origin) / voxel).astype(np.int64), 0, dims_arr - 1)
    half = np.ceil(TRUNCATION_SIGMAS * scales.max(axis=1) / voxel).astype(np.int64) + 1
    half = np.minimum(half, int(dims_arr.max()))
    for w in np.unique(half):
        span = np.arange(-w, w + 1)
        offsets = np.stack(np.meshgrid(span, span, span, indexing="ij"), axis=-1).reshape(-1, 3)
        members = np.flatnonzero(half == w)
        step = max(1, DENSITY_BLOCK // len(offsets))
        for start in range(0, len(members), step):
            block = members[start : start + step]
            idx = centre[block, None, :] + offsets[None, :, :]
            inside = np.all((idx >= 0) & (idx < dims_arr), axis=-1)
            d = origin + (idx + 0.5) * voxel - positions[block, None, :]
            m2 = _mahalanobis_sq(d, rotmats[block], scales[block])
            keep = inside & (m2 <= TRUNCATION_SIGMAS**2)
            lin = np.ravel_multi_index(tuple(idx[keep].T), dims)
            contrib = (weights[block, None] * np.exp(-0.5 * m2))[keep]
            flat += np.bincount(lin, weights=contrib, minlength=flat.size)
    return flat.reshape(dims)


def _splat_everywhere(
    positions: np.ndarray,
    rotmats: np.ndarray,
    scales: np.ndarray,
    weights: np.ndarray,
    origin: np.ndarray,
    voxel: float,
    dims: tuple[int, int, int],
) -> np.ndarray:
    axes = [origin[a] + (np.arange(dims[a]) + 0.5) * voxel for a in range(3)]
    points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    flat = np.zeros(len(points))
    step = max(1, DENSITY_BLOCK // len(points))
    for start in range(0, len(positions), step):
        sl = slice(start, start + step)
        m2 = _mahalanobis_sq(points[None, :, :] - positions[sl, None, :], rotmats[sl], scales[sl])
        flat += weights[sl] @ np.exp(-0.5 * m2)
    return flat.reshape(dims)


def rasterize_density(cloud: GaussianCloud, resolution: int = 128, *, truncate: bool = True) -> DensityGrid:
    """Sum of opacity-weighted Gaussian densities at voxel centres.

    Each Gaussian is evaluated only inside its 3 sigma Mahalanobis radius unless
    truncate is False, which evaluates every Gaussian at every voxel.
    """
    if len(cloud) == 0:
        raise EmptyCloudError("cannot build a density grid from an empty cloud")
    origin, voxel, dims = _grid_frame(cloud, resolution)
    splat = _splat_windows if truncate else _splat_everywhere
    values = splat(
        cloud.positions,
        quat_to_rotmat(cloud.rotations),
        scales_from_log(cloud.log_scales),
        cloud.opacities,
        origin,
        voxel,
        dims,
    )
    logger.debug("density grid dims=%s voxel=%.4g gaussians=%d", dims, voxel, len(cloud))
    return DensityGrid(origin=origin, voxel_size=voxel, values=values)


def central_gradient(grid: DensityGrid, idx: Sequence[int]) -> np.ndarray:
    """Index-unit central difference at an interior voxel."""
    if not grid.is_interior(idx):
        raise BoundaryIndexError(f"voxel {tuple(int(i) for i in idx)} is not interior to grid {grid.dims}")
    x, y, z = (int(i) for i in idx)
    v = grid.values
    return np.array([v[x + 1, y, z] - v[x - 1, y, z], v[x, y + 1, z] - v[x, y - 1, z], v[x, y, z + 1] - v[x, y, z - 1]])


def central_gradient_field(values: np.ndarray) -> np.ndarray:
    """Central differences for every voxel, (nx, ny, nz, 3); zero on the boundary shell."""
    grad = np.zeros(values.shape + (3,))
    interior = (slice(1, -1),) * 3
    grad[interior + (0,)] = (values[2:, :, :] - values[:-2, :, :])[:, 1:-1, 1:-1]
    grad[interior + (1,)] = (values[:, 2:, :] - values[:, :-2, :])[1:-1, :, 1:-1]
    grad[interior + (2,)] = (values[:, :, 2:] - values[:, :, :-2])[1:-1, 1:-1, :]
    return grad


def unit_normal(g_xyz: np.ndarray) -> np.ndarray | None:
    """G / |G|, or None (FLAT) when |G| <= EPS_GRAD."""
    g = np.asarray(g_xyz, dtype=np.float64)
    norm = math.sqrt(float(g @ g))
    if norm <= EPS_GRAD:
        return None
    return g / norm


def unit_normal_field(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normals (zero where FLAT) and the FLAT mask; boundary voxels are FLAT."""
    norm = np.linalg.norm(grad, axis=-1)
    flat = norm <= EPS_GRAD
    flat[0, :, :] = flat[-1, :, :] = True
    flat[:, 0, :] = flat[:, -1, :] = True
    flat[:, :, 0] = flat[:, :, -1] = True
    safe = np.where(flat, 1.0, norm)
    return np.where(flat[..., None], 0.0, grad / safe[..., None]), flat


def _is_flat(normals: np.ndarray, idx: Sequence[int], flat: np.ndarray | None) -> bool:
    if any(i < 0 or i >= n for i, n in zip(idx, normals.shape[:3])):
        return True
    if flat is not None:
        return bool(flat[tuple(idx)])
    return not np.any(normals[tuple(idx)])


def normal_gradient(normals: np.ndarray, idx: Sequence[int], flat: np.ndarray | None = None) -> float:
    """Modulus of the forward normal differences along x, y and z at one voxel.

    An axis whose voxel or +1 neighbour is FLAT contributes nothing.
    """
    dims = normals.shape[:3]
    if not all(1 <= int(i) <= n - 2 for i, n in zip(idx, dims)):
        raise BoundaryIndexError(f"voxel {tuple(int(i) for i in idx)} is not interior to grid {dims}")
    here = tuple(int(i) for i in idx)
    if _is_flat(normals, here, flat):
        return 0.0
    total = 0.0
    for axis in range(3):
        nxt = list(here)
        nxt[axis] += 1
        if _is_flat(normals, nxt, flat):
            continue
        delta = np.abs(normals[tuple(nxt)] - normals[here])
        total += float(delta @ delta)
    return math.sqrt(total)


def normal_gradient_field(normals: np.ndarray, flat: np.ndarray) -> np.ndarray:
    sq = np.zeros(normals.shape[:3])
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        lo_t, hi_t = tuple(lo), tuple(hi)
        diff = normals[hi_t] - normals[lo_t]
        ok = ~flat[hi_t] & ~flat[lo_t]
        sq[lo_t] += np.where(ok, np.sum(diff * diff, axis=-1), 0.0)
    return np.sqrt(sq)


def fuse_gradient(g_geo: float, g_norm: float, omega: float, denom_geo: float, denom_norm: float) -> float:
    """(1 - omega) * g_geo / denom_geo + omega * g_norm / denom_norm."""
    if denom_geo <= 0.0 or denom_norm <= 0.0:
        raise ValueError(f"denominators must be positive, got {denom_geo} and {denom_norm}")
    if not 0.0 <= omega <= 1.0:
        raise ValueError(f"omega must be in [0, 1], got {omega}")
    return (1.0 - omega) * (g_geo / denom_geo) + omega * (g_norm / denom_norm)


@dataclass
class FusedField:
    """Gradient fields of one density grid."""

    grid: DensityGrid
    geo: np.ndarray
    g_norm: np.ndarray
    fused: np.ndarray
    flat: np.ndarray
    denom_geo: float
    denom_norm: float


def fused_gradient_field(grid: DensityGrid, omega: float) -> FusedField:
    """Fused Grad per voxel; denominators are the interior maxima floored at DENOM_FLOOR."""
    grad = central_gradient_field(grid.values)
    geo = np.linalg.norm(grad, axis=-1)
    normals, flat = unit_normal_field(grad)
    g_norm = normal_gradient_field(normals, flat)
    interior = (slice(1, -1),) * 3
    denom_geo = max(float(geo[interior].max()), DENOM_FLOOR)
    denom_norm = max(float(g_norm[interior].max()), DENOM_FLOOR)
    fused = (1.0 - omega) * geo / denom_geo + omega * g_norm / denom_norm
    return FusedField(grid=grid, geo=geo, g_norm=g_norm, fused=fused, flat=flat, denom_geo=denom_geo, denom_norm=denom_norm)


def sample_fused_gradient(cloud: GaussianCloud, cfg: DensifyConfig) -> tuple[np.ndarray, FusedField]:
    """Fused Grad at each Gaussian's containing voxel."""
    field_ = fused_gradient_field(rasterize_density(cloud, cfg.grid_resolution), cfg.omega)
    idx = field_.grid.voxel_of(cloud.positions)
    return field_.fused[idx[:, 0], idx[:, 1], idx[:, 2]], field_


def assign_level(accumulated_grad: float, cfg: DensifyConfig) -> int:
    """Hierarchy level on the threshold ladder; DENSE adds one level per DENSE_STEP above the top rung."""
    if cfg.strategy is Strategy.NONE:
        return 0
    level = sum(1 for t in cfg.thresholds if t <= accumulated_grad)
    if cfg.strategy is Strategy.DENSE and accumulated_grad >= cfg.thresholds[-1]:
        level += int(math.floor((accumulated_grad - cfg.thresholds[-1]) / DENSE_STEP))
    return level


def assign_levels(accumulated: np.ndarray, cfg: DensifyConfig) -> np.ndarray:
    acc = np.asarray(accumulated, dtype=np.float64)
    if cfg.strategy is Strategy.NONE:
        return np.zeros(acc.shape, dtype=np.int64)
    ladder = np.asarray(cfg.thresholds)
    level = np.searchsorted(ladder, acc, side="right").astype(np.int64)
    if cfg.strategy is Strategy.DENSE:
        top = ladder[-1]
        extra = np.floor(np.maximum(acc - top, 0.0) / DENSE_STEP).astype(np.int64)
        level += np.where(acc >= top, extra, 0)
    return level


def split_cloud(cloud: GaussianCloud, indices: np.ndarray, halvings: np.ndarray) -> tuple[GaussianCloud, np.ndarray]:
    """Halve cloud[indices[i]] halvings[i] times; children of one parent stay contiguous.

    Each halving replaces a Gaussian by two copies offset by +-0.5 sigma_max along
    its largest axis with every scale divided by 1.6. Returns (children, parent index per child).
    """
    sub = cloud.take(indices)
    parent = np.asarray(indices, dtype=np.int64).copy()
    remaining = np.asarray(halvings, dtype=np.int64).copy()
    shrink = math.log(SPLIT_SCALE_SHRINK)
    while np.any(remaining > 0):
        splitting = remaining > 0
        reps = np.where(splitting, 2, 1)
        rows = np.repeat(np.arange(len(sub)), reps)
        first = np.concatenate([[True], rows[1:] != rows[:-1]])
        sign = np.where(splitting[rows], np.where(first, -1.0, 1.0), 0.0)
        nxt = sub.take(rows)
        scales = scales_from_log(nxt.log_scales)
        axis = np.argmax(scales, axis=1)
        rot = quat_to_rotmat(nxt.rotations) if len(nxt) else np.zeros((0, 3, 3))
        r = np.arange(len(nxt))
        offset = SPLIT_OFFSET_SIGMAS * scales[r, axis][:, None] * rot[r, :, axis]
        nxt.positions = nxt.positions + sign[:, None] * offset
        nxt.log_scales = np.where(splitting[rows][:, None], nxt.log_scales - shrink, nxt.log_scales)
        sub = nxt
        parent = parent[rows]
        remaining = np.where(splitting, remaining - 1, 0)[rows]
    return sub, parent


def split_gaussian(g: Gaussian3D, level: int, level_cap: int = 8) -> list[Gaussian3D]:
    """2 ** min(level, level_cap) children of g."""
    if level < 1:
        raise ValueError(f"split level must be >= 1, got {level}")
    children, _ = split_cloud(GaussianCloud.from_gaussians([g]), np.array([0]), np.array([min(level, level_cap)]))
    return list(children)


@dataclass
class DensifyStats:
    """Per-Gaussian statistics gathered between densify steps."""

    screen_grad_sum: np.ndarray
    visits: np.ndarray
    hngd_accum: np.ndarray
    hngd_samples: int = 0
    levels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @classmethod
    def zeros(cls, n: int) -> "DensifyStats":
        return cls(np.zeros(n), np.zeros(n, dtype=np.int64), np.zeros(n), 0, np.zeros(n, dtype=np.int64))

    def add_screen(self, visible: np.ndarray, norms: np.ndarray) -> None:
        np.add.at(self.screen_grad_sum, visible, norms)
        np.add.at(self.visits, visible, 1)

    def add_hngd(self, visible: np.ndarray, grads: np.ndarray) -> None:
        np.add.at(self.hngd_accum, visible, grads[visible])
        self.hngd_samples += 1

    @property
    def mean_screen_grad(self) -> np.ndarray:
        return self.screen_grad_sum / np.maximum(self.visits, 1)

    @classmethod
    def restart(cls, levels: np.ndarray) -> "DensifyStats":
        """Fresh accumulators for a new cloud; hierarchy levels carry over."""
        fresh = cls.zeros(len(levels))
        fresh.levels = np.asarray(levels, dtype=np.int64).copy()
        return fresh


@dataclass(frozen=True)
class DensifyReport:
    before: int
    after: int
    cloned: int
    split: int
    pruned: int
    hngd_levels: tuple[int, ...]
    hngd_children: int
    truncated: bool = False

    @property
    def hngd_split(self) -> int:
        return sum(self.hngd_levels)

    def split_counts(self) -> list[int]:
        return list(self.hngd_levels)


@dataclass
class DensifyOutcome:
    cloud: GaussianCloud
    report: DensifyReport
    origin: np.ndarray
    fresh: np.ndarray
    levels: np.ndarray


def _fit_budget(
    budget: int,
    kept: int,
    clone_idx: np.ndarray,
    base_split_idx: np.ndarray,
    extra: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """Trim HNGD levels highest-first, then clones, then baseline splits until the total fits."""
    extra = extra.copy()

    def total() -> int:
        return kept + len(clone_idx) + 2 * len(base_split_idx) + int(np.sum(np.where(extra > 0, 2**extra, 0)))

    over = total() - budget
    if over <= 0:
        return clone_idx, base_split_idx, extra, False
    while over > 0 and extra.max(initial=0) > 0:
        top = int(extra.max())
        cand = np.flatnonzero(extra == top)[::-1]
        saving = 2 ** (top - 1)
        need = min(len(cand), -(-over // saving))
        extra[cand[:need]] -= 1
        over -= need * saving
    if over > 0 and len(clone_idx):
        drop = min(len(clone_idx), over)
        clone_idx = clone_idx[: len(clone_idx) - drop]
        over -= drop
    if over > 0 and len(base_split_idx):
        drop = min(len(base_split_idx), over)
        base_split_idx = base_split_idx[: len(base_split_idx) - drop]
        over -= drop
    return clone_idx, base_split_idx, extra, True


def densify_step(
    cloud: GaussianCloud,
    screen_grads: np.ndarray,
    cfg: DensifyConfig,
    *,
    hngd_grads: np.ndarray | None = None,
    levels: np.ndarray | None = None,
    scene_extent: float | None = None,
) -> DensifyOutcome:
    """One densification pass: baseline clone/split/prune plus hierarchical splitting.

    screen_grads is the mean accumulated screen-space positional gradient per
    Gaussian, hngd_grads the fused gradient summed over the interval (sampled once
    and scaled up when not given). New rows are ordered: kept, clones, baseline
    children, hierarchical children.
    """
    n = len(cloud)
    levels = np.zeros(n, dtype=np.int64) if levels is None else np.asarray(levels, dtype=np.int64)
    screen_grads = np.asarray(screen_grads, dtype=np.float64)
    if scene_extent is None:
        lo, hi = cloud.bbox
        scene_extent = max(0.5 * float(np.linalg.norm(hi - lo)), 1e-6)

    extra = np.zeros(n, dtype=np.int64)
    if cfg.strategy is not Strategy.NONE and n > 0:
        if hngd_grads is None:
            sampled, _ = sample_fused_gradient(cloud, cfg)
            hngd_grads = sampled * cfg.samples_per_interval
        assigned = assign_levels(hngd_grads, cfg)
        extra = np.clip(assigned - levels, 0, cfg.level_cap)

    prune = cloud.opacities < cfg.prune_opacity
    extra = np.where(prune, 0, extra)
    hngd = extra > 0
    candidate = (screen_grads >= cfg.clone_grad_threshold) & ~prune & ~hngd
    small = cloud.scales.max(axis=1) <= cfg.percent_dense * scene_extent if n else np.zeros(0, dtype=bool)
    clone_idx = np.flatnonzero(candidate & small)
    base_split_idx = np.flatnonzero(candidate & ~small)

    kept_mask = ~prune & ~hngd
    kept_mask[base_split_idx] = False
    kept_idx = np.flatnonzero(kept_mask)

    clone_idx, base_split_idx, extra, truncated = _fit_budget(
        cfg.max_gaussians, len(kept_idx), clone_idx, base_split_idx, extra
    )
    # HNGD candidates trimmed to level 0 stay as they are
    kept_mask = ~prune & (extra == 0)
    kept_mask[base_split_idx] = False
    kept_idx = np.flatnonzero(kept_mask)
    hngd_idx = np.flatnonzero(extra > 0)

    base_children, base_parent = split_cloud(cloud, base_split_idx, np.ones(len(base_split_idx), dtype=np.int64))
    hngd_children, hngd_parent = split_cloud(cloud, hngd_idx, extra[hngd_idx])

    new_cloud = cloud.take(kept_idx).concat(cloud.take(clone_idx)).concat(base_children).concat(hngd_children)
    origin = np.concatenate([kept_idx, clone_idx, base_parent, hngd_parent]).astype(np.int64)
    fresh = np.concatenate(
        [np.zeros(len(kept_idx), dtype=bool), np.ones(len(origin) - len(kept_idx), dtype=bool)]
    )
    new_levels = levels[origin].copy()
    new_levels[len(origin) - len(hngd_parent):] = (levels + extra)[hngd_parent]

    top = int((levels + extra)[hngd_idx].max(initial=0))
    level_counts = tuple(int(np.count_nonzero((levels + extra)[hngd_idx] == lv)) for lv in range(1, top + 1))
    report = DensifyReport(
        before=n,
        after=len(new_cloud),
        cloned=len(clone_idx),
        split=len(base_split_idx),
        pruned=int(np.count_nonzero(prune)),
        hngd_levels=level_counts,
        hngd_children=len(hngd_children),
        truncated=truncated,
    )
    logger.info(
        "densify before=%d after=%d cloned=%d split=%d pruned=%d hngd=%s",
        report.before,
        report.after,
        report.cloned,
        report.split,
        report.pruned,
        list(level_counts),
    )
    return DensifyOutcome(cloud=new_cloud, report=report, origin=origin, fresh=fresh, levels=new_levels)
