"""Tile-based front-to-back alpha compositing of splats, its reverse pass, and a brute-force reference renderer.

A splat touches a pixel only when the pixel centre lies inside the axis-aligned
box of its 3 sigma extent. Within a tile, splats are ordered by (depth, source_index).
Per pixel:

    alpha_i = min(opacity_i * exp(-1/2 d^T cov2d^-1 d), ALPHA_MAX)   skipped if < ALPHA_MIN
    color  += T_i * alpha_i * color_i,  T_{i+1} = T_i * (1 - alpha_i)
    stop before splat i once T_i < T_MIN; color += T_final * background
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from splatting.app_logging import get_logger
from splatting.camera import Camera, Projection, Splat2D, SplatBatch, project_cloud
from splatting.errors import DegenerateGaussianError, DimensionMismatchError
from splatting.scene import GaussianCloud
from splatting.shading import ShadeCache, ShadingConfig, shade_cloud

logger = get_logger(__name__)

TILE_SIZE = 16
ALPHA_MAX = 0.99
ALPHA_MIN = 1.0 / 255.0
T_MIN = 1e-4
FOOTPRINT_SIGMAS = 3.0

THREADS_ENV = "SPLAT_THREADS"


def default_threads() -> int:
    """Worker count from SPLAT_THREADS, else all cores."""
    raw = (os.environ.get(THREADS_ENV) or "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
        else:
            if value >= 1:
                return value
            logger.warning("ignoring non-positive %s=%r", THREADS_ENV, raw)
    return os.cpu_count() or 1


@dataclass
class Image:
    """H x W x 3 float buffer, channels in [0, 1] once finalized."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise DimensionMismatchError(f"image must be H x W x 3, got {self.pixels.shape}")

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    @classmethod
    def constant(cls, width: int, height: int, color: Sequence[float] = (0.0, 0.0, 0.0)) -> "Image":
        return cls(np.broadcast_to(np.asarray(color, dtype=np.float64), (height, width, 3)).copy())


def require_same_size(a: Image, b: Image) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"image sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}")


@dataclass
class TileGrid:
    """Per-tile splat lists. order[ranges[t, 0]:ranges[t, 1]] are batch rows of tile t, sorted by (depth, source_index)."""

    tile_size: int
    tiles_x: int
    tiles_y: int
    width: int
    height: int
    order: np.ndarray
    ranges: np.ndarray

    @property
    def tile_count(self) -> int:
        return self.tiles_x * self.tiles_y

    def tile_list(self, tile: int) -> np.ndarray:
        start, end = self.ranges[tile]
        return self.order[start:end]

    def tile_pixels(self, tile: int) -> tuple[np.ndarray, np.ndarray]:
        """Pixel x and y coordinates covered by a tile, row-major."""
        ty, tx = divmod(tile, self.tiles_x)
        xs = np.arange(tx * self.tile_size, min((tx + 1) * self.tile_size, self.width))
        ys = np.arange(ty * self.tile_size, min((ty + 1) * self.tile_size, self.height))
        gy, gx = np.meshgrid(ys, xs, indexing="ij")
        return gx.ravel(), gy.ravel()

    def tile_slices(self, tile: int) -> tuple[slice, slice]:
        ty, tx = divmod(tile, self.tiles_x)
        return (
            slice(ty * self.tile_size, min((ty + 1) * self.tile_size, self.height)),
            slice(tx * self.tile_size, min((tx + 1) * self.tile_size, self.width)),
        )


def _as_batch(splats: SplatBatch | Sequence[Splat2D]) -> SplatBatch:
    return splats if isinstance(splats, SplatBatch) else SplatBatch.from_splats(list(splats))


def bin_tiles(
    splats: SplatBatch | Sequence[Splat2D],
    resolution: tuple[int, int],
    tile_size: int = TILE_SIZE,
) -> TileGrid:
    """Assign each splat to every tile its 3 sigma box overlaps; sort each tile by (depth, source_index)."""
    batch = _as_batch(splats)
    width, height = int(resolution[0]), int(resolution[1])
    tiles_x = -(-width // tile_size)
    tiles_y = -(-height // tile_size)
    n_tiles = tiles_x * tiles_y
    if len(batch) == 0:
        return TileGrid(tile_size, tiles_x, tiles_y, width, height, np.zeros(0, dtype=np.int64), np.zeros((n_tiles, 2), dtype=np.int64))

    radii = batch.radii
    mx, my = batch.means2d[:, 0], batch.means2d[:, 1]
    x0 = np.floor((mx - radii) / tile_size).astype(np.int64)
    x1 = np.floor((mx + radii) / tile_size).astype(np.int64)
    y0 = np.floor((my - radii) / tile_size).astype(np.int64)
    y1 = np.floor((my + radii) / tile_size).astype(np.int64)
    x0c, x1c = np.clip(x0, 0, tiles_x - 1), np.clip(x1, 0, tiles_x - 1)
    y0c, y1c = np.clip(y0, 0, tiles_y - 1), np.clip(y1, 0, tiles_y - 1)
    hits = (x1 >= 0) & (x0 <= tiles_x - 1) & (y1 >= 0) & (y0 <= tiles_y - 1)
    nx = np.where(hits, x1c - x0c + 1, 0)
    ny = np.where(hits, y1c - y0c + 1, 0)
    counts = nx * ny

    rows = np.repeat(np.arange(len(batch)), counts)
    # position of each pair within its splat's rectangle
    first = np.repeat(np.cumsum(counts) - counts, counts)
    local = np.arange(len(rows)) - first
    tx = x0c[rows] + local % nx[rows]
    ty = y0c[rows] + local // nx[rows]
    tile_ids = ty * tiles_x + tx

    order = np.lexsort((batch.source_indices[rows], batch.depths[rows], tile_ids))
    sorted_tiles = tile_ids[order]
    starts = np.searchsorted(sorted_tiles, np.arange(n_tiles), side="left")
    ends = np.searchsorted(sorted_tiles, np.arange(n_tiles), side="right")
    return TileGrid(
        tile_size=tile_size,
        tiles_x=tiles_x,
        tiles_y=tiles_y,
        width=width,
        height=height,
        order=rows[order].astype(np.int64),
        ranges=np.stack([starts, ends], axis=1).astype(np.int64),
    )


def _conic_terms(cov2d: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a, b, c = cov2d[..., 0, 0], cov2d[..., 0, 1], cov2d[..., 1, 1]
    det = a * c - b * b
    return c / det, -b / det, a / det


@dataclass
class _TileAlpha:
    """Per-(pixel, splat) forward quantities for one tile; P pixels by K splats."""

    dx: np.ndarray
    dy: np.ndarray
    gauss: np.ndarray
    alpha: np.ndarray
    live: np.ndarray
    unclamped: np.ndarray


def _tile_alpha(batch: SplatBatch, rows: np.ndarray, px: np.ndarray, py: np.ndarray) -> _TileAlpha:
    means = batch.means2d[rows]
    qa, qb, qc = _conic_terms(batch.cov2d[rows])
    radii = batch.radii[rows]
    dx = px[:, None] - means[None, :, 0]
    dy = py[:, None] - means[None, :, 1]
    power = -0.5 * (qa * dx * dx + 2.0 * qb * dx * dy + qc * dy * dy)
    gauss = np.exp(np.minimum(power, 0.0))
    raw = batch.opacities[rows] * gauss
    alpha = np.minimum(raw, ALPHA_MAX)
    inside = (np.abs(dx) <= radii) & (np.abs(dy) <= radii)
    live = inside & (alpha >= ALPHA_MIN) & (power <= 0.0)
    return _TileAlpha(dx=dx, dy=dy, gauss=gauss, alpha=np.where(live, alpha, 0.0), live=live, unclamped=raw < ALPHA_MAX)


def _blend_weights(alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Blend weights T_i * alpha_i, T_i and T_final for a (P, K) alpha stack with early stop."""
    p = alpha.shape[0]
    one_minus = 1.0 - alpha
    t_incl = np.cumprod(one_minus, axis=1)
    t_excl = np.concatenate([np.ones((p, 1)), t_incl[:, :-1]], axis=1)
    active = t_excl >= T_MIN
    weights = np.where(active, t_excl * alpha, 0.0)
    t_final = np.prod(np.where(active, one_minus, 1.0), axis=1)
    return weights, np.where(active, t_excl, 0.0), t_final


def _composite_tile(batch: SplatBatch, grid: TileGrid, tile: int, background: np.ndarray):
    px, py = grid.tile_pixels(tile)
    rows = grid.tile_list(tile)
    if len(rows) == 0:
        return tile, np.broadcast_to(background, (len(px), 3)).copy(), np.ones(len(px))
    ta = _tile_alpha(batch, rows, px.astype(np.float64), py.astype(np.float64))
    weights, _, t_final = _blend_weights(ta.alpha)
    color = weights @ batch.colors[rows] + t_final[:, None] * background
    return tile, color, t_final


def composite_tiles(
    batch: SplatBatch,
    grid: TileGrid,
    background: np.ndarray,
    threads: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Composite every tile; returns (pixels (H, W, 3), final transmittance (H, W))."""
    background = np.asarray(background, dtype=np.float64)
    pixels = np.empty((grid.height, grid.width, 3))
    trans = np.empty((grid.height, grid.width))
    workers = threads or default_threads()

    def work(tile: int):
        return _composite_tile(batch, grid, tile, background)

    if workers <= 1 or grid.tile_count == 1:
        results = map(work, range(grid.tile_count))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, range(grid.tile_count)))
    for tile, color, t_final in results:
        ys, xs = grid.tile_slices(tile)
        h, w = ys.stop - ys.start, xs.stop - xs.start
        pixels[ys, xs] = color.reshape(h, w, 3)
        trans[ys, xs] = t_final.reshape(h, w)
    return pixels, trans


@dataclass
class SplatGrads:
    """dL/d splat quantities, rows aligned with the SplatBatch."""

    means2d: np.ndarray
    conics: np.ndarray
    opacities: np.ndarray
    colors: np.ndarray
    background: np.ndarray

    def cov2d(self, batch: SplatBatch) -> np.ndarray:
        """Chain the conic partials to dL/dcov2d (M, 2, 2) through Q = cov2d^-1."""
        conic = batch.conics
        g = np.empty((len(batch), 2, 2))
        g[:, 0, 0] = self.conics[:, 0]
        g[:, 0, 1] = g[:, 1, 0] = 0.5 * self.conics[:, 1]
        g[:, 1, 1] = self.conics[:, 2]
        return -conic @ g @ conic


def _tile_backward(batch: SplatBatch, grid: TileGrid, tile: int, background: np.ndarray, d_pixels: np.ndarray):
    rows = grid.tile_list(tile)
    ys, xs = grid.tile_slices(tile)
    g = d_pixels[ys, xs].reshape(-1, 3)
    if len(rows) == 0:
        return tile, rows, None, g.sum(axis=0)
    px, py = grid.tile_pixels(tile)
    ta = _tile_alpha(batch, rows, px.astype(np.float64), py.astype(np.float64))
    weights, t_excl, t_final = _blend_weights(ta.alpha)
    colors = batch.colors[rows]

    d_colors = weights.T @ g
    d_background = t_final @ g

    gc = g @ colors.T
    contrib = weights * gc
    # S_k: what splats behind k (and the background) add, seen from k
    behind = np.cumsum(contrib[:, ::-1], axis=1)[:, ::-1] - contrib
    behind = behind + (t_final * (g @ background))[:, None]
    active = t_excl > 0.0
    d_alpha = np.where(active & ta.live, t_excl * gc - behind / (1.0 - ta.alpha), 0.0)
    d_alpha = np.where(ta.unclamped, d_alpha, 0.0)

    opac = batch.opacities[rows]
    d_opac = np.sum(d_alpha * ta.gauss, axis=0)
    d_power = d_alpha * ta.gauss * opac
    qa, qb, qc = _conic_terms(batch.cov2d[rows])
    dx, dy = ta.dx, ta.dy
    d_mean = np.stack(
        [np.sum(d_power * (qa * dx + qb * dy), axis=0), np.sum(d_power * (qb * dx + qc * dy), axis=0)],
        axis=1,
    )
    d_conic = np.stack(
        [
            np.sum(d_power * (-0.5 * dx * dx), axis=0),
            np.sum(d_power * (-dx * dy), axis=0),
            np.sum(d_power * (-0.5 * dy * dy), axis=0),
        ],
        axis=1,
    )
    return tile, rows, (d_mean, d_conic, d_opac, d_colors), d_background


def composite_tiles_backward(
    batch: SplatBatch,
    grid: TileGrid,
    background: np.ndarray,
    d_pixels: np.ndarray,
    threads: int | None = None,
) -> SplatGrads:
    """Reverse pass of composite_tiles for dL/dpixels (H, W, 3); per-tile partials merge in tile order."""
    background = np.asarray(background, dtype=np.float64)
    m = len(batch)
    out = SplatGrads(
        means2d=np.zeros((m, 2)),
        conics=np.zeros((m, 3)),
        opacities=np.zeros(m),
        colors=np.zeros((m, 3)),
        background=np.zeros(3),
    )
    workers = threads or default_threads()

    def work(tile: int):
        return _tile_backward(batch, grid, tile, background, d_pixels)

    if workers <= 1 or grid.tile_count == 1:
        results = map(work, range(grid.tile_count))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, range(grid.tile_count)))
    for _, rows, partial, d_bg in results:
        out.background += d_bg
        if partial is None:
            continue
        d_mean, d_conic, d_opac, d_colors = partial
        np.add.at(out.means2d, rows, d_mean)
        np.add.at(out.conics, rows, d_conic)
        np.add.at(out.opacities, rows, d_opac)
        np.add.at(out.colors, rows, d_colors)
    return out


def composite_pixel(
    ordered_splats: Sequence[Splat2D],
    pixel: Sequence[float],
    background: Sequence[float] = (0.0, 0.0, 0.0),
) -> tuple[np.ndarray, float]:
    """Scalar front-to-back loop for one pixel; returns (color, final transmittance)."""
    px, py = float(pixel[0]), float(pixel[1])
    color = np.zeros(3)
    trans = 1.0
    for s in ordered_splats:
        if trans < T_MIN:
            break
        dx = px - float(s.mean2d[0])
        dy = py - float(s.mean2d[1])
        cov = np.asarray(s.cov2d, dtype=np.float64)
        radius = FOOTPRINT_SIGMAS * np.sqrt(np.linalg.eigvalsh(cov)[-1])
        if abs(dx) > radius or abs(dy) > radius:
            continue
        det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
        if det <= 0.0:
            raise DegenerateGaussianError(f"splat {s.source_index}: cov2d is not positive definite")
        power = -0.5 * (cov[1, 1] * dx * dx - 2.0 * cov[0, 1] * dx * dy + cov[0, 0] * dy * dy) / det
        if power > 0.0:
            continue
        alpha = min(s.opacity * np.exp(power), ALPHA_MAX)
        if alpha < ALPHA_MIN:
            continue
        color += trans * alpha * np.asarray(s.color, dtype=np.float64)
        trans *= 1.0 - alpha
    return color + trans * np.asarray(background, dtype=np.float64), trans


@dataclass
class RenderResult:
    """A rendered image plus the forward state the backward pass needs."""

    image: Image
    transmittance: np.ndarray
    projection: Projection
    shade: ShadeCache
    splats: SplatBatch
    grid: TileGrid
    background: np.ndarray


def _prepare(cam: Camera, cloud: GaussianCloud, shading_cfg: ShadingConfig) -> tuple[Projection, ShadeCache, SplatBatch]:
    proj = project_cloud(cam, cloud)
    colors, shade = shade_cloud(cloud, cam.center, shading_cfg, proj.indices)
    return proj, shade, proj.splats(colors)


def render_with_cache(
    cam: Camera,
    cloud: GaussianCloud,
    shading_cfg: ShadingConfig,
    background: Sequence[float] = (0.0, 0.0, 0.0),
    threads: int | None = None,
) -> RenderResult:
    """Cull, shade, project, bin and composite; keeps intermediates for the reverse pass."""
    bg = np.asarray(background, dtype=np.float64)
    proj, shade, batch = _prepare(cam, cloud, shading_cfg)
    grid = bin_tiles(batch, cam.resolution)
    pixels, trans = composite_tiles(batch, grid, bg, threads)
    logger.debug("render visible=%d tiles=%d pairs=%d", len(batch), grid.tile_count, len(grid.order))
    return RenderResult(
        image=Image(np.clip(pixels, 0.0, 1.0)),
        transmittance=trans,
        projection=proj,
        shade=shade,
        splats=batch,
        grid=grid,
        background=bg,
    )


def render(
    cam: Camera,
    cloud: GaussianCloud,
    shading_cfg: ShadingConfig,
    background: Sequence[float] = (0.0, 0.0, 0.0),
    threads: int | None = None,
) -> Image:
    return render_with_cache(cam, cloud, shading_cfg, background, threads).image


def render_reference(
    cam: Camera,
    cloud: GaussianCloud,
    shading_cfg: ShadingConfig,
    background: Sequence[float] = (0.0, 0.0, 0.0),
) -> Image:
    """Untiled renderer: one global depth sort, splats applied in turn to every pixel."""
    bg = np.asarray(background, dtype=np.float64)
    width, height = cam.resolution
    _, _, batch = _prepare(cam, cloud, shading_cfg)
    gy, gx = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing="ij")
    color = np.zeros((height, width, 3))
    trans = np.ones((height, width))
    qa, qb, qc = _conic_terms(batch.cov2d)
    radii = batch.radii
    for k in np.lexsort((batch.source_indices, batch.depths)):
        dx = gx - batch.means2d[k, 0]
        dy = gy - batch.means2d[k, 1]
        power = -0.5 * (qa[k] * dx * dx + 2.0 * qb[k] * dx * dy + qc[k] * dy * dy)
        alpha = np.minimum(batch.opacities[k] * np.exp(np.minimum(power, 0.0)), ALPHA_MAX)
        live = (
            (np.abs(dx) <= radii[k])
            & (np.abs(dy) <= radii[k])
            & (power <= 0.0)
            & (alpha >= ALPHA_MIN)
            & (trans >= T_MIN)
        )
        a = np.where(live, alpha, 0.0)
        color += (trans * a)[..., None] * batch.colors[k]
        trans = trans * (1.0 - a)
    return Image(np.clip(color + trans[..., None] * bg, 0.0, 1.0))
