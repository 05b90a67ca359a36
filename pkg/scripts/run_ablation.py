#!/usr/bin/env python3
"""Train one synthetic scene under a matrix of shading modes and densification strategies.

Writes a JSON table with one row per (mode, strategy): final mean training-view
PSNR and SSIM and the final Gaussian count.

Run from project root:
    python scripts/run_ablation.py --scene mirror_lit --iterations 2000 --out ablation.json
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from splatting.app_logging import configure_logging, get_logger
from splatting.config import load_settings
from splatting.hngd import Strategy
from splatting.shading import ShadingMode
from splatting.synthetic import SyntheticKind, make_synthetic
from splatting.train import evaluate_views, train

logger = get_logger(__name__)


def run_ablation(
    kind: SyntheticKind,
    seed: int,
    iterations: int,
    modes: list[ShadingMode],
    strategies: list[Strategy],
    threads: int | None = None,
    config: Path | None = None,
) -> list[dict]:
    settings = load_settings(config)
    scene = make_synthetic(kind, seed)
    train_cfg = dataclasses.replace(settings.train, iterations=iterations, seed=seed, test_every=0)
    rows = []
    for mode in modes:
        shading = dataclasses.replace(scene.shading, mode=mode)
        for strategy in strategies:
            densify = dataclasses.replace(settings.densify, strategy=strategy)
            started = time.monotonic()
            result = train(scene.cloud.copy(), scene.views, train_cfg, densify, shading, threads=threads)
            scores = evaluate_views(result.cloud, scene.views, shading, train_cfg.background, threads)
            row = {
                "mode": mode.value,
                "strategy": strategy.value,
                "psnr": scores["psnr"],
                "ssim": scores["ssim"],
                "gaussians": len(result.cloud),
                "seconds": round(time.monotonic() - started, 1),
            }
            logger.info("ablation %s/%s psnr=%.3f ssim=%.4f gaussians=%d", mode.value, strategy.value,
                        row["psnr"], row["ssim"], row["gaussians"])
            rows.append(row)
    return rows


def main() -> int:
    parser = argparse.ArgumentParser(description="Shading-mode x densification-strategy ablation")
    parser.add_argument("--scene", choices=[k.value for k in SyntheticKind], default=SyntheticKind.MIRROR_LIT.value)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--iterations", type=int, default=2000)
    parser.add_argument("--modes", nargs="+", choices=[m.value for m in ShadingMode], default=[m.value for m in ShadingMode])
    parser.add_argument("--strategies", nargs="+", choices=[s.value for s in Strategy], default=[s.value for s in Strategy])
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--config", type=Path, default=None)
    parser.add_argument("--out", type=Path, default=None, help="JSON output path (default: stdout)")
    args = parser.parse_args()
    configure_logging()

    try:
        rows = run_ablation(
            SyntheticKind(args.scene),
            args.seed,
            args.iterations,
            [ShadingMode(m) for m in args.modes],
            [Strategy(s) for s in args.strategies],
            threads=args.threads,
            config=args.config,
        )
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    table = {"scene": args.scene, "seed": args.seed, "iterations": args.iterations, "runs": rows}
    text = json.dumps(table, indent=2)
    if args.out is None:
        print(text)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text + "\n", encoding="utf-8")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
