"""Tests for splatting/train.py.

Run with:
    python -m unittest tests.test_train
"""

from __future__ import annotations

import sys
import unittest
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from splatting.camera import Camera
from splatting.errors import ConfigError
from splatting.hngd import DensifyConfig, Strategy
from splatting.raster import render
from splatting.scene import FIELD_NAMES
from splatting.shading import ShadingConfig
from splatting.train import (
    TrainConfig,
    active_sh_degree,
    evaluate_views,
    scene_extent,
    split_views,
    train,
)
from tests.fixtures import random_cloud

SIZE = 16


def _views(count: int = 3):
    truth = random_cloud(8, seed=20, spread=0.6, log_scale_range=(-1.8, -1.2))
    cams = [
        Camera.look_at((4.0 * np.sin(a), -4.0 * np.cos(a), 0.5), (0.0, 0.0, 0.0), width=SIZE, height=SIZE)
        for a in np.linspace(0.0, 1.2, count)
    ]
    return [(cam, render(cam, truth, ShadingConfig(), threads=1)) for cam in cams]


def _init():
    return random_cloud(8, seed=21, spread=0.6, log_scale_range=(-1.8, -1.2))


class TestTrainConfig(unittest.TestCase):
    def test_rejects_bad_values(self) -> None:
        with self.assertRaises(ConfigError):
            TrainConfig(iterations=-1)
        with self.assertRaises(ConfigError):
            TrainConfig(loss_lambda=1.5)
        with self.assertRaises(ConfigError):
            TrainConfig(densify_from=10, densify_until=5)
        with self.assertRaises(ConfigError):
            TrainConfig(background=(0.0, 2.0, 0.0))

    def test_split_views(self) -> None:
        self.assertEqual(split_views(10, 0), (list(range(10)), []))
        self.assertEqual(split_views(10, 8), ([1, 2, 3, 4, 5, 6, 7, 9], [0, 8]))

    def test_active_sh_degree_ramps(self) -> None:
        cfg = TrainConfig(sh_degree_interval=100)
        shading = ShadingConfig()
        self.assertEqual(active_sh_degree(cfg, shading, 1), 0)
        self.assertEqual(active_sh_degree(cfg, shading, 101), 1)
        self.assertEqual(active_sh_degree(cfg, shading, 10_000), shading.sh_degree)

    def test_scene_extent(self) -> None:
        cams = [Camera.look_at((x, -3.0, 0.0), (0.0, 0.0, 0.0)) for x in (-1.0, 1.0)]
        self.assertAlmostEqual(scene_extent(cams), 1.1)


class TestTrain(unittest.TestCase):
    def test_zero_iterations_returns_input(self) -> None:
        cloud = _init()
        result = train(cloud, _views(), TrainConfig(iterations=0), DensifyConfig(), ShadingConfig(), threads=1)
        self.assertEqual(result.records, [])
        for name in FIELD_NAMES:
            np.testing.assert_array_equal(getattr(result.cloud, name), getattr(cloud, name))

    def test_no_views_rejected(self) -> None:
        with self.assertRaises(ConfigError):
            train(_init(), [], TrainConfig(iterations=1), DensifyConfig(), ShadingConfig())

    def test_deterministic_for_fixed_seed(self) -> None:
        views = _views()
        cfg = TrainConfig(iterations=4, seed=7)
        runs = [
            train(_init(), views, cfg, DensifyConfig(strategy=Strategy.NONE), ShadingConfig(), threads=threads)
            for threads in (1, 3)
        ]
        self.assertEqual([r.to_csv_line() for r in runs[0].records], [r.to_csv_line() for r in runs[1].records])
        for name in FIELD_NAMES:
            np.testing.assert_array_equal(getattr(runs[0].cloud, name), getattr(runs[1].cloud, name))

    def test_records_and_callback(self) -> None:
        seen = []
        result = train(
            _init(),
            _views(),
            TrainConfig(iterations=3),
            DensifyConfig(strategy=Strategy.NONE),
            ShadingConfig(),
            threads=1,
            on_record=seen.append,
        )
        self.assertEqual([r.iteration for r in result.records], [1, 2, 3])
        self.assertEqual(seen, result.records)
        self.assertTrue(all(r.gaussian_count == 8 for r in result.records))

    def test_densify_runs_on_schedule(self) -> None:
        cfg = TrainConfig(iterations=4, densify_from=0, densify_until=4)
        densify = DensifyConfig(densify_interval=2, hngd_sample_interval=1, grid_resolution=16, clone_grad_threshold=0.0)
        result = train(_init(), _views(), cfg, densify, ShadingConfig(), threads=1)
        self.assertEqual([it for it, _ in result.reports], [2, 4])
        self.assertGreater(result.records[-1].gaussian_count, 8)

    def test_held_out_metrics(self) -> None:
        views = _views(count=4)
        result = train(
            _init(),
            views,
            TrainConfig(iterations=2, test_every=2),
            DensifyConfig(strategy=Strategy.NONE),
            ShadingConfig(),
            threads=1,
        )
        self.assertIsNotNone(result.test_metrics)
        self.assertEqual(set(result.test_metrics), {"psnr", "ssim"})

    def test_evaluate_views_on_truth(self) -> None:
        truth = random_cloud(8, seed=20, spread=0.6, log_scale_range=(-1.8, -1.2))
        metrics = evaluate_views(truth, _views(), ShadingConfig(), threads=1)
        self.assertEqual(metrics["psnr"], float("inf"))
        self.assertAlmostEqual(metrics["ssim"], 1.0, places=12)


if __name__ == "__main__":
    unittest.main()
