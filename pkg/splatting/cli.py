"""Command-line entry points: train, render, eval, densify-inspect, synth.

Machine-readable output (training log records, key=value metrics) goes to
stdout; logs and errors go to stderr. Exit codes: 0 success, 1 runtime failure,
2 usage, configuration or input errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from splatting.app_logging import configure_logging, get_logger
from splatting.camera import Camera
from splatting.config import Settings, config_as_dict, load_settings, settings_as_dict
from splatting.errors import DimensionMismatchError, FormatError, NonFiniteGradientError
from splatting.formats.cameras import CameraSet, load_cameras, save_cameras, shading_override
from splatting.formats.checkpoint import is_checkpoint, load_checkpoint, save_checkpoint
from splatting.formats.grids import write_grid
from splatting.formats.images import load_image, save_image
from splatting.formats.points import load_points, save_points
from splatting.hngd import DensifyConfig, Strategy, densify_step, fused_gradient_field, rasterize_density
from splatting.metrics import format_psnr, psnr, ssim
from splatting.raster import Image, render
from splatting.records import CSV_HEADER
from splatting.scene import GaussianCloud
from splatting.sh import SH_C0
from splatting.shading import ShadingMode
from splatting.synthetic import SyntheticKind, make_synthetic
from splatting.train import train

logger = get_logger(__name__)

EVAL_HOLDOUT = 8
IMAGE_SUFFIXES = (".png",)


def _settings(args: argparse.Namespace, cams: CameraSet | None = None) -> Settings:
    """Defaults, then --config, then the camera file's shading block, then flags."""
    settings = load_settings(args.config)
    shading = shading_override(cams, settings.shading) if cams is not None else settings.shading
    shading_changes = {}
    if getattr(args, "shading_mode", None):
        shading_changes["mode"] = ShadingMode(args.shading_mode)
    if getattr(args, "light_direction", None) is not None:
        shading_changes["light_direction"] = tuple(args.light_direction)
    if getattr(args, "sh_degree", None) is not None:
        shading_changes["sh_degree"] = args.sh_degree
    densify_changes = {}
    for flag, name in (("strategy", "strategy"), ("omega", "omega"), ("resolution", "grid_resolution"),
                       ("densify_interval", "densify_interval")):
        value = getattr(args, flag, None)
        if value is not None:
            densify_changes[name] = Strategy(value) if name == "strategy" else value
    train_changes = {}
    for name in ("iterations", "seed", "loss_lambda", "densify_from", "densify_until"):
        value = getattr(args, name, None)
        if value is not None:
            train_changes[name] = value
    if getattr(args, "eval", False):
        train_changes["test_every"] = EVAL_HOLDOUT
    return Settings(
        train=dataclasses.replace(settings.train, **train_changes),
        densify=dataclasses.replace(settings.densify, **densify_changes),
        shading=dataclasses.replace(shading, **shading_changes),
    )


def load_scene(path: Path) -> GaussianCloud:
    """A checkpoint (recognised by its header) or a point file."""
    if is_checkpoint(path):
        cloud, _ = load_checkpoint(path)
        return cloud
    return load_points(path)


def load_views(cams: CameraSet) -> list[tuple[Camera, Image]]:
    views = []
    for i, (cam, image_path) in enumerate(zip(cams.cameras, cams.image_paths)):
        if image_path is None:
            raise FormatError(str(cams.source), f"views[{i}]: training needs an image path")
        img = load_image(image_path)
        if (img.width, img.height) != cam.resolution:
            raise DimensionMismatchError(
                f"{image_path}: image is {img.width}x{img.height}, camera expects {cam.width}x{cam.height}"
            )
        views.append((cam, img))
    return views


def _open_log(path: Path | None) -> TextIO:
    if path is None:
        return sys.stdout
    path.parent.mkdir(parents=True, exist_ok=True)
    return path.open("w", encoding="utf-8")


def cmd_train(args: argparse.Namespace) -> int:
    cams = load_cameras(args.cameras)
    settings = _settings(args, cams)
    cloud = load_scene(args.scene)
    views = load_views(cams)
    out = _open_log(args.log)
    try:
        print(CSV_HEADER, file=out)
        result = train(
            cloud,
            views,
            settings.train,
            settings.densify,
            settings.shading,
            threads=args.threads,
            on_record=lambda rec: print(rec.to_csv_line(), file=out),
        )
    finally:
        if out is not sys.stdout:
            out.close()
    echo = settings_as_dict(settings)
    if result.test_metrics is not None:
        echo["test_metrics"] = result.test_metrics
    save_checkpoint(args.out, result.cloud, echo)
    logger.info("wrote %s (%d gaussians)", args.out, len(result.cloud))
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    cams = load_cameras(args.cameras)
    settings = _settings(args, cams)
    cloud, _ = load_checkpoint(args.checkpoint)
    for i, cam in enumerate(cams.cameras):
        img = render(cam, cloud, settings.shading, settings.train.background, args.threads)
        save_image(args.out / f"view_{i:03d}.png", img)
    logger.info("rendered %d views to %s", len(cams), args.out)
    return 0


def _image_files(path: Path) -> dict[str, Path]:
    if path.is_file():
        return {path.name: path}
    if not path.is_dir():
        raise FormatError(str(path), "no such file or directory")
    return {p.name: p for p in sorted(path.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES}


def cmd_eval(args: argparse.Namespace) -> int:
    renders = _image_files(args.renders)
    truth = _image_files(args.gt)
    if args.renders.is_file() and args.gt.is_file():
        pairs = [(args.renders, args.gt)]
    else:
        if set(renders) != set(truth):
            missing = sorted(set(renders) ^ set(truth))
            raise FormatError(str(args.renders), f"image sets differ: {missing}")
        if not renders:
            raise FormatError(str(args.renders), "no images to compare")
        pairs = [(renders[name], truth[name]) for name in sorted(renders)]
    scores_psnr, scores_ssim = [], []
    for a, b in pairs:
        img_a, img_b = load_image(a), load_image(b)
        scores_psnr.append(psnr(img_a, img_b))
        scores_ssim.append(ssim(img_a, img_b))
    print(f"images={len(pairs)}")
    print(f"psnr={format_psnr(float(np.mean(scores_psnr)))}")
    print(f"ssim={float(np.mean(scores_ssim)):.6f}")
    return 0


_INSPECT_FIELDS = ("fused", "geo", "normal", "density")


def cmd_densify_inspect(args: argparse.Namespace) -> int:
    settings = _settings(args)
    cfg: DensifyConfig = settings.densify
    if cfg.strategy is Strategy.NONE:
        logger.warning("strategy none: no hierarchical splits will be reported")
    cloud, _ = load_checkpoint(args.checkpoint)
    grid = rasterize_density(cloud, cfg.grid_resolution)
    fused = fused_gradient_field(grid, cfg.omega)
    outcome = densify_step(cloud, np.zeros(len(cloud)), cfg)
    report = outcome.report
    print(f"gaussians={len(cloud)}")
    print("grid={}x{}x{}".format(*grid.dims))
    print(f"voxel_size={grid.voxel_size:.6g}")
    print(f"flat_voxels={int(np.count_nonzero(fused.flat))}")
    print(f"denom_geo={fused.denom_geo:.6g}")
    print(f"denom_norm={fused.denom_norm:.6g}")
    print(f"hngd_split={report.hngd_split}")
    for level, count in enumerate(report.hngd_levels, start=1):
        print(f"level_{level}={count}")
    print(f"after={report.after}")
    if args.dump is not None:
        values = {"fused": fused.fused, "geo": fused.geo, "normal": fused.g_norm, "density": grid.values}[args.field]
        write_grid(args.dump, values, grid.origin, grid.voxel_size)
    if args.out is not None:
        save_checkpoint(args.out, outcome.cloud, {"densify": config_as_dict(cfg)})
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    scene = make_synthetic(args.kind, args.seed)
    out: Path = args.out
    names = [f"images/view_{i:03d}.png" for i in range(len(scene.views))]
    for name, (_, img) in zip(names, scene.views):
        save_image(out / name, img)
    save_cameras(out / "cameras.yaml", scene.cameras, names, config_as_dict(scene.shading))
    echo = {"synthetic": scene.kind.value, "seed": args.seed}
    save_checkpoint(out / "truth.ckpt", scene.truth, echo)
    save_checkpoint(out / "init.ckpt", scene.cloud, echo)
    colors = np.clip(scene.truth.sh_diffuse[:, 0, :] * SH_C0 + 0.5, 0.0, 1.0)
    save_points(out / "points.ply", scene.truth.positions, colors)
    logger.info("wrote %s scene (seed %d) to %s", scene.kind.value, args.seed, out)
    return 0


def _add_shading_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--shading-mode", choices=[m.value for m in ShadingMode], default=None)
    p.add_argument("--light-direction", type=float, nargs=3, default=None, metavar=("X", "Y", "Z"))
    p.add_argument("--sh-degree", type=int, default=None)


def _add_densify_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default=None)
    p.add_argument("--omega", type=float, default=None, help="Normal-gradient weight in [0, 1]")
    p.add_argument("--resolution", type=int, default=None, help="Density grid resolution")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splatting", description="CPU Gaussian splatting with LD shading and HNGD densification.")
    parser.add_argument("--threads", type=int, default=None, help="Tile worker threads (default: SPLAT_THREADS or all cores)")
    parser.add_argument("--config", type=Path, default=None, help="YAML overriding splatting/defaults.yaml")
    parser.add_argument("--log-dir", type=Path, default=None, help="Also write splatting.log here")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="Optimize a scene against posed images")
    p_train.add_argument("scene", type=Path, help="Point file (.ply or text) or checkpoint")
    p_train.add_argument("cameras", type=Path, help="Camera file with image paths")
    p_train.add_argument("--out", type=Path, required=True, help="Checkpoint to write")
    p_train.add_argument("--log", type=Path, default=None, help="Write the CSV training log here instead of stdout")
    p_train.add_argument("--iterations", type=int, default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--loss-lambda", type=float, default=None)
    p_train.add_argument("--densify-from", type=int, default=None)
    p_train.add_argument("--densify-until", type=int, default=None)
    p_train.add_argument("--densify-interval", type=int, default=None)
    p_train.add_argument("--eval", action="store_true", help=f"Hold out every {EVAL_HOLDOUT}th view for testing")
    _add_shading_flags(p_train)
    _add_densify_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_render = sub.add_parser("render", help="Render a checkpoint from every camera")
    p_render.add_argument("checkpoint", type=Path)
    p_render.add_argument("cameras", type=Path)
    p_render.add_argument("--out", type=Path, required=True, help="Output directory for view_NNN.png")
    _add_shading_flags(p_render)
    p_render.set_defaults(func=cmd_render)

    p_eval = sub.add_parser("eval", help="PSNR/SSIM between two images or two directories of PNGs")
    p_eval.add_argument("renders", type=Path)
    p_eval.add_argument("gt", type=Path)
    p_eval.set_defaults(func=cmd_eval)

    p_inspect = sub.add_parser("densify-inspect", help="Report the hierarchical split a checkpoint would receive")
    p_inspect.add_argument("checkpoint", type=Path)
    _add_densify_flags(p_inspect)
    p_inspect.add_argument("--dump", type=Path, default=None, help="Write a voxel field dump")
    p_inspect.add_argument("--field", choices=_INSPECT_FIELDS, default="fused")
    p_inspect.add_argument("--out", type=Path, default=None, help="Write the densified cloud as a checkpoint")
    p_inspect.set_defaults(func=cmd_densify_inspect)

    p_synth = sub.add_parser("synth", help="Write a synthetic scene with ground-truth views")
    p_synth.add_argument("kind", choices=[k.value for k in SyntheticKind])
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", type=Path, required=True)
    p_synth.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_dir)
    if args.threads is not None and args.threads < 1:
        print(f"error: --threads must be >= 1, got {args.threads}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except NonFiniteGradientError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, IndexError, FileNotFoundError, ImportError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception("unexpected failure")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
