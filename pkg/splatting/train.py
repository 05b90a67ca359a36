"""Training loop: render, backpropagate, step, and densify on schedule."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logit

from splatting.app_logging import get_logger
from splatting.backward import DEFAULT_LAMBDA, backward_with_stats
from splatting.camera import Camera
from splatting.errors import ConfigError
from splatting.hngd import DensifyConfig, DensifyReport, DensifyStats, Strategy, densify_step, sample_fused_gradient
from splatting.metrics import psnr, ssim
from splatting.optim import AdamState, exponential_lr, step
from splatting.raster import Image, render
from splatting.records import TrainRecord, make_record
from splatting.scene import GaussianCloud
from splatting.sh import SH_COEFFS
from splatting.shading import ShadingConfig

logger = get_logger(__name__)

OPACITY_RESET_CEILING = 0.01
EXTENT_MARGIN = 1.1
LOG_EVERY = 100


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 2000
    loss_lambda: float = DEFAULT_LAMBDA
    position_lr_init: float = 1.6e-4
    position_lr_final: float = 1.6e-6
    sh_lr: float = 2.5e-3
    sh_rest_factor: float = 0.05
    opacity_lr: float = 5e-2
    scale_lr: float = 5e-3
    rotation_lr: float = 1e-3
    specular_lr: float = 5e-3
    lighting_lr: float = 5e-3
    densify_from: int = 500
    densify_until: int = 15000
    opacity_reset_interval: int = 3000
    sh_degree_interval: int = 500
    test_every: int = 0
    seed: int = 0
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "background", tuple(float(c) for c in self.background))
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if not 0.0 <= self.loss_lambda <= 1.0:
            raise ConfigError(f"loss_lambda must be in [0, 1], got {self.loss_lambda}")
        for name in (
            "position_lr_init",
            "position_lr_final",
            "sh_lr",
            "sh_rest_factor",
            "opacity_lr",
            "scale_lr",
            "rotation_lr",
            "specular_lr",
            "lighting_lr",
        ):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.densify_from < 0 or self.densify_until < self.densify_from:
            raise ConfigError(f"densify window [{self.densify_from}, {self.densify_until}] is invalid")
        for name in ("opacity_reset_interval", "sh_degree_interval", "test_every"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if len(self.background) != 3 or not all(0.0 <= c <= 1.0 for c in self.background):
            raise ConfigError(f"background must be three values in [0, 1], got {list(self.background)}")


@dataclass
class TrainResult:
    cloud: GaussianCloud
    records: list[TrainRecord]
    reports: list[tuple[int, DensifyReport]] = field(default_factory=list)
    test_metrics: dict[str, float] | None = None


def scene_extent(cameras: Sequence[Camera]) -> float:
    """Radius of the camera-centre bounding sphere, with a 10% margin."""
    centers = np.stack([c.center for c in cameras])
    radius = float(np.max(np.linalg.norm(centers - centers.mean(axis=0), axis=1)))
    return EXTENT_MARGIN * radius if radius > 1e-9 else 1.0


def learning_rates(cfg: TrainConfig, iteration: int, extent: float) -> dict[str, float | np.ndarray]:
    sh_rates = np.full((SH_COEFFS, 1), cfg.sh_lr * cfg.sh_rest_factor)
    sh_rates[0] = cfg.sh_lr
    return {
        "positions": exponential_lr(cfg.position_lr_init, cfg.position_lr_final, iteration, cfg.iterations) * extent,
        "log_scales": cfg.scale_lr,
        "rotations": cfg.rotation_lr,
        "opacity_logits": cfg.opacity_lr,
        "sh_diffuse": sh_rates,
        "sh_specular": sh_rates,
        "specular_logits": cfg.specular_lr,
        "visibility": cfg.lighting_lr,
        "local_light": cfg.lighting_lr,
        "global_light": cfg.lighting_lr,
    }


def split_views(n_views: int, test_every: int) -> tuple[list[int], list[int]]:
    """(train indices, held-out indices); every test_every-th view is held out."""
    if test_every <= 0:
        return list(range(n_views)), []
    test = list(range(0, n_views, test_every))
    train = [i for i in range(n_views) if i % test_every != 0]
    return train, test


def active_sh_degree(cfg: TrainConfig, shading_cfg: ShadingConfig, iteration: int) -> int:
    if cfg.sh_degree_interval <= 0:
        return shading_cfg.sh_degree
    return min(shading_cfg.sh_degree, (iteration - 1) // cfg.sh_degree_interval)


def evaluate_views(
    cloud: GaussianCloud,
    views: Sequence[tuple[Camera, Image]],
    shading_cfg: ShadingConfig,
    background: Sequence[float] = (0.0, 0.0, 0.0),
    threads: int | None = None,
) -> dict[str, float]:
    """Mean PSNR/SSIM of renders against the given views."""
    scores_psnr, scores_ssim = [], []
    for cam, gt in views:
        img = render(cam, cloud, shading_cfg, background, threads)
        scores_psnr.append(psnr(img, gt))
        scores_ssim.append(ssim(img, gt))
    return {"psnr": float(np.mean(scores_psnr)), "ssim": float(np.mean(scores_ssim))}


def train(
    cloud: GaussianCloud,
    views: Sequence[tuple[Camera, Image]],
    cfg: TrainConfig,
    densify_cfg: DensifyConfig,
    shading_cfg: ShadingConfig,
    *,
    threads: int | None = None,
    on_record: Callable[[TrainRecord], None] | None = None,
) -> TrainResult:
    """Optimize cloud against posed images; deterministic for a fixed seed."""
    if not views:
        raise ConfigError("training needs at least one view")
    train_idx, test_idx = split_views(len(views), cfg.test_every)
    if not train_idx:
        raise ConfigError(f"test_every={cfg.test_every} leaves no training views out of {len(views)}")
    extent = scene_extent([views[i][0] for i in train_idx])
    rng = np.random.default_rng(cfg.seed)
    state = AdamState.zeros(cloud)
    stats = DensifyStats.zeros(len(cloud))
    records: list[TrainRecord] = []
    reports: list[tuple[int, DensifyReport]] = []
    order: list[int] = []
    reset_logit = float(logit(OPACITY_RESET_CEILING))
    logger.info(
        "train start gaussians=%d views=%d held_out=%d iterations=%d strategy=%s mode=%s",
        len(cloud),
        len(train_idx),
        len(test_idx),
        cfg.iterations,
        densify_cfg.strategy.value,
        shading_cfg.mode.value,
    )

    for it in range(1, cfg.iterations + 1):
        if not order:
            order = [train_idx[i] for i in rng.permutation(len(train_idx))]
        cam, gt = views[order.pop(0)]
        shade_it = dataclasses.replace(shading_cfg, sh_degree=active_sh_degree(cfg, shading_cfg, it))

        result = backward_with_stats(cloud, cam, gt, shade_it, cfg.loss_lambda, cfg.background, threads)
        iter_psnr = psnr(result.render.image, gt)
        cloud, state = step(cloud, result.grads, state, learning_rates(cfg, it, extent))

        split_counts: tuple[int, ...] = ()
        in_window = it <= cfg.densify_until
        if in_window and len(cloud):
            stats.add_screen(result.visible, result.screen_grad_norms)
            if (
                densify_cfg.strategy is not Strategy.NONE
                and it > cfg.densify_from
                and it % densify_cfg.hngd_sample_interval == 0
            ):
                sampled, _ = sample_fused_gradient(cloud, densify_cfg)
                stats.add_hngd(result.visible, sampled)

        if in_window and it > cfg.densify_from and it % densify_cfg.densify_interval == 0 and len(cloud):
            outcome = densify_step(
                cloud,
                stats.mean_screen_grad,
                densify_cfg,
                hngd_grads=stats.hngd_accum if stats.hngd_samples else None,
                levels=stats.levels,
                scene_extent=extent,
            )
            cloud = outcome.cloud
            state = state.remap(outcome.origin, outcome.fresh)
            stats = DensifyStats.restart(outcome.levels)
            reports.append((it, outcome.report))
            split_counts = tuple(outcome.report.split_counts())

        if (
            in_window
            and cfg.opacity_reset_interval > 0
            and it % cfg.opacity_reset_interval == 0
            and len(cloud)
        ):
            cloud.opacity_logits = np.minimum(cloud.opacity_logits, reset_logit)
            state.reset("opacity_logits")
            logger.info("opacity reset at iteration %d", it)

        record = make_record(it, result.loss, iter_psnr, len(cloud), split_counts)
        records.append(record)
        if on_record is not None:
            on_record(record)
        if it % LOG_EVERY == 0 or it == cfg.iterations:
            logger.info("iter=%d loss=%.6f psnr=%.3f gaussians=%d", it, result.loss, iter_psnr, len(cloud))

    test_metrics = None
    if test_idx:
        test_metrics = evaluate_views(cloud, [views[i] for i in test_idx], shading_cfg, cfg.background, threads)
        logger.info("held-out psnr=%.4f ssim=%.4f", test_metrics["psnr"], test_metrics["ssim"])
    return TrainResult(cloud=cloud, records=records, reports=reports, test_metrics=test_metrics)
