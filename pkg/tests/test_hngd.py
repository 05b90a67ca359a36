"""Tests for splatting/hngd.py.

Run with:
    python -m unittest tests.test_hngd
"""

from __future__ import annotations

import math
import sys
import unittest
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from splatting.errors import BoundaryIndexError, ConfigError, EmptyCloudError
from splatting.hngd import (
    SPLIT_SCALE_SHRINK,
    DensifyConfig,
    DensifyStats,
    DensityGrid,
    Strategy,
    assign_level,
    assign_levels,
    central_gradient,
    central_gradient_field,
    densify_step,
    fuse_gradient,
    fused_gradient_field,
    normal_gradient,
    rasterize_density,
    sample_fused_gradient,
    split_cloud,
    split_gaussian,
    unit_normal,
    unit_normal_field,
)
from splatting.scene import Gaussian3D, GaussianCloud, gaussian_density
from splatting.synthetic import SHELL_RADIUS, SyntheticKind, make_synthetic
from tests.fixtures import random_cloud


def _grid(values: np.ndarray) -> DensityGrid:
    return DensityGrid(origin=np.zeros(3), voxel_size=0.1, values=values)


class TestDensityGrid(unittest.TestCase):
    def test_single_gaussian_peaks_at_its_voxel(self) -> None:
        g = Gaussian3D.isotropic([0.2, -0.1, 0.4], 0.1, opacity=0.7)
        grid = rasterize_density(GaussianCloud.from_gaussians([g]), resolution=16)
        peak = np.unravel_index(np.argmax(grid.values), grid.dims)
        centre = np.array([grid.centers(axis)[peak[axis]] for axis in range(3)])
        self.assertLessEqual(float(np.linalg.norm(centre - g.position)), 0.5 * math.sqrt(3.0) * grid.voxel_size + 1e-12)
        self.assertLessEqual(float(grid.values.max()), 0.7 + 1e-12)

    def test_truncation_only_drops_far_tails(self) -> None:
        cloud = random_cloud(6, seed=1)
        cut = rasterize_density(cloud, resolution=12)
        full = rasterize_density(cloud, resolution=12, truncate=False)
        diff = full.values - cut.values
        self.assertTrue(np.all(diff >= -1e-12))
        self.assertLessEqual(float(diff.max()), 6 * math.exp(-4.5) + 1e-12)

    def test_matches_pointwise_density_sum(self) -> None:
        cloud = random_cloud(7, seed=17)
        grid = rasterize_density(cloud, resolution=10)
        full = rasterize_density(cloud, resolution=10, truncate=False)
        cut_limit = math.exp(-0.5 * 9.0)
        expected_cut = np.zeros(grid.dims)
        expected_full = np.zeros(grid.dims)
        for idx in np.ndindex(*grid.dims):
            x = np.array([grid.centers(axis)[idx[axis]] for axis in range(3)])
            for g in cloud:
                dens = g.opacity * gaussian_density(g, x)
                expected_full[idx] += dens
                if dens >= g.opacity * cut_limit:
                    expected_cut[idx] += dens
        np.testing.assert_allclose(full.values, expected_full, rtol=1e-10, atol=1e-14)
        np.testing.assert_allclose(grid.values, expected_cut, rtol=1e-10, atol=1e-14)

    def test_empty_cloud_raises(self) -> None:
        with self.assertRaises(EmptyCloudError):
            rasterize_density(GaussianCloud.empty())

    def test_grid_needs_four_voxels_per_axis(self) -> None:
        with self.assertRaises(ValueError):
            _grid(np.zeros((3, 5, 5)))


class TestCentralGradient(unittest.TestCase):
    def test_constant_grid_is_zero(self) -> None:
        grid = _grid(np.full((6, 6, 6), 0.7))
        np.testing.assert_array_equal(central_gradient(grid, (2, 3, 2)), np.zeros(3))
        self.assertIsNone(unit_normal(central_gradient(grid, (2, 3, 2))))

    def test_affine_grid(self) -> None:
        a, b, c = 0.3, -1.2, 2.0
        x, y, z = np.meshgrid(np.arange(6), np.arange(7), np.arange(8), indexing="ij")
        grid = _grid(a * x + b * y + c * z)
        np.testing.assert_allclose(central_gradient(grid, (3, 3, 3)), [2 * a, 2 * b, 2 * c], atol=1e-12)
        field = central_gradient_field(grid.values)
        np.testing.assert_allclose(field[1:-1, 1:-1, 1:-1], np.broadcast_to([2 * a, 2 * b, 2 * c], (4, 5, 6, 3)), atol=1e-12)

    def test_boundary_voxel_raises(self) -> None:
        grid = _grid(np.zeros((5, 5, 5)))
        with self.assertRaises(BoundaryIndexError):
            central_gradient(grid, (0, 2, 2))
        with self.assertRaises(BoundaryIndexError):
            central_gradient(grid, (2, 4, 2))

    def test_unit_normal(self) -> None:
        np.testing.assert_allclose(unit_normal(np.array([3.0, 0.0, 4.0])), [0.6, 0.0, 0.8])


class TestNormalGradient(unittest.TestCase):
    def test_uniform_normals_have_zero_gradient(self) -> None:
        normals = np.broadcast_to([0.0, 0.0, 1.0], (5, 5, 5, 3)).copy()
        self.assertEqual(normal_gradient(normals, (2, 2, 2)), 0.0)

    def test_flipped_normal_along_x(self) -> None:
        normals = np.zeros((6, 5, 5, 3))
        normals[:3, ..., 0] = 1.0
        normals[3:, ..., 0] = -1.0
        self.assertAlmostEqual(normal_gradient(normals, (2, 2, 2)), 2.0, places=15)
        self.assertEqual(normal_gradient(normals, (3, 2, 2)), 0.0)

    def test_flat_neighbour_contributes_nothing(self) -> None:
        normals = np.broadcast_to([1.0, 0.0, 0.0], (5, 5, 5, 3)).copy()
        normals[3, 2, 2] = 0.0
        self.assertEqual(normal_gradient(normals, (2, 2, 2)), 0.0)
        self.assertEqual(normal_gradient(normals, (3, 2, 2)), 0.0)

    def test_field_matches_pointwise(self) -> None:
        rng = np.random.default_rng(2)
        grid = _grid(rng.uniform(size=(6, 6, 6)))
        normals, flat = unit_normal_field(central_gradient_field(grid.values))
        fused = fused_gradient_field(grid, 0.5)
        for idx in [(1, 1, 1), (2, 3, 4), (4, 4, 3)]:
            self.assertAlmostEqual(fused.g_norm[idx], normal_gradient(normals, idx, flat), places=12)


class TestFuse(unittest.TestCase):
    def test_endpoints(self) -> None:
        self.assertAlmostEqual(fuse_gradient(3.0, 5.0, 0.0, 6.0, 10.0), 0.5)
        self.assertAlmostEqual(fuse_gradient(3.0, 5.0, 1.0, 6.0, 10.0), 0.5)
        self.assertAlmostEqual(fuse_gradient(3.0, 2.0, 1.0, 6.0, 10.0), 0.2)

    def test_affine_in_omega(self) -> None:
        rng = np.random.default_rng(3)
        for _ in range(100):
            g_geo, g_norm, omega = rng.uniform(size=3)
            lo = fuse_gradient(g_geo, g_norm, 0.0, 1.0, 2.0)
            hi = fuse_gradient(g_geo, g_norm, 1.0, 1.0, 2.0)
            self.assertAlmostEqual(fuse_gradient(g_geo, g_norm, omega, 1.0, 2.0), (1 - omega) * lo + omega * hi, places=14)

    def test_monotone_in_each_gradient(self) -> None:
        rng = np.random.default_rng(13)
        for omega in (0.0, 0.3, 0.5, 1.0):
            for _ in range(50):
                g_geo, g_norm, bump = rng.uniform(size=3)
                base = fuse_gradient(g_geo, g_norm, omega, 1.5, 2.5)
                self.assertGreaterEqual(fuse_gradient(g_geo + bump, g_norm, omega, 1.5, 2.5), base)
                self.assertGreaterEqual(fuse_gradient(g_geo, g_norm + bump, omega, 1.5, 2.5), base)

    def test_rejects_bad_arguments(self) -> None:
        with self.assertRaises(ValueError):
            fuse_gradient(1.0, 1.0, 0.5, 0.0, 1.0)
        with self.assertRaises(ValueError):
            fuse_gradient(1.0, 1.0, 1.5, 1.0, 1.0)

    def test_field_normalized_to_unit_maximum(self) -> None:
        field = fused_gradient_field(rasterize_density(random_cloud(8, seed=4), resolution=10), omega=0.0)
        interior = (slice(1, -1),) * 3
        self.assertAlmostEqual(float(field.fused[interior].max()), 1.0, places=12)


class TestLevels(unittest.TestCase):
    def test_ladder(self) -> None:
        dense = DensifyConfig(strategy=Strategy.DENSE)
        sparse = DensifyConfig(strategy=Strategy.SPARSE)
        self.assertEqual(assign_level(0.9, dense), 0)
        self.assertEqual(assign_level(1.0, dense), 1)
        self.assertEqual(assign_level(2.2, dense), 3)
        self.assertEqual(assign_level(3.6, dense), 6)
        self.assertEqual(assign_level(4.6, dense), 8)
        self.assertEqual(assign_level(4.6, sparse), 6)
        self.assertEqual(assign_level(4.6, DensifyConfig(strategy=Strategy.NONE)), 0)

    def test_vectorized_matches_scalar(self) -> None:
        values = np.linspace(0.0, 6.0, 61)
        for strategy in Strategy:
            cfg = DensifyConfig(strategy=strategy)
            self.assertEqual(assign_levels(values, cfg).tolist(), [assign_level(v, cfg) for v in values])

    def test_monotone_in_gradient(self) -> None:
        values = np.sort(np.random.default_rng(14).uniform(0.0, 8.0, size=400))
        for strategy in (Strategy.DENSE, Strategy.SPARSE):
            levels = assign_levels(values, DensifyConfig(strategy=strategy))
            self.assertTrue(np.all(np.diff(levels) >= 0), strategy)

    def test_config_validation(self) -> None:
        with self.assertRaises(ConfigError):
            DensifyConfig(omega=1.5)
        with self.assertRaises(ConfigError):
            DensifyConfig(thresholds=(1.0, 0.5))
        with self.assertRaises(ValueError):
            DensifyConfig(strategy="bogus")


class TestSplit(unittest.TestCase):
    def test_one_halving(self) -> None:
        g = Gaussian3D.isotropic([1.0, 2.0, 3.0], 0.2)
        g = Gaussian3D(
            position=g.position,
            log_scale=np.log([0.4, 0.2, 0.1]),
            rotation=g.rotation,
            opacity_logit=g.opacity_logit,
            sh_diffuse=g.sh_diffuse,
            sh_specular=g.sh_specular,
            specular_logit=g.specular_logit,
        )
        children = split_gaussian(g, 1)
        self.assertEqual(len(children), 2)
        np.testing.assert_allclose(children[0].position, [0.8, 2.0, 3.0], atol=1e-12)
        np.testing.assert_allclose(children[1].position, [1.2, 2.0, 3.0], atol=1e-12)
        for child in children:
            np.testing.assert_allclose(np.exp(child.log_scale), np.array([0.4, 0.2, 0.1]) / SPLIT_SCALE_SHRINK)
            self.assertEqual(child.opacity_logit, g.opacity_logit)

    def test_child_count_and_cap(self) -> None:
        g = Gaussian3D.isotropic([0.0, 0.0, 0.0], 0.5)
        self.assertEqual(len(split_gaussian(g, 3)), 8)
        self.assertEqual(len(split_gaussian(g, 12, level_cap=4)), 16)
        with self.assertRaises(ValueError):
            split_gaussian(g, 0)

    def test_eigenvalues_shrink_by_split_factor(self) -> None:
        for g in random_cloud(5, seed=15):
            parent = np.linalg.eigvalsh(g.covariance)
            for child in split_gaussian(g, 1):
                np.testing.assert_allclose(np.linalg.eigvalsh(child.covariance), parent / SPLIT_SCALE_SHRINK**2, rtol=1e-9)

    def test_children_preserve_mean(self) -> None:
        for level in (1, 2, 4):
            for g in random_cloud(4, seed=16):
                children = split_gaussian(g, level)
                weights = np.array([child.opacity for child in children])
                centroid = weights @ np.array([child.position for child in children]) / weights.sum()
                np.testing.assert_allclose(centroid, g.position, atol=1e-9)

    def test_children_stay_near_parent_and_contiguous(self) -> None:
        cloud = random_cloud(4, seed=5)
        children, parent = split_cloud(cloud, np.array([1, 3]), np.array([2, 3]))
        self.assertEqual(parent.tolist(), [1] * 4 + [3] * 8)
        for child, p in zip(children, parent):
            reach = 0.5 * float(cloud.scales[p].max()) * sum(SPLIT_SCALE_SHRINK**-k for k in range(3))
            self.assertLessEqual(float(np.linalg.norm(child.position - cloud.positions[p])), reach + 1e-12)


class TestDensifyStep(unittest.TestCase):
    def test_none_strategy_quiet_cloud_is_unchanged(self) -> None:
        cloud = random_cloud(10, seed=6)
        cloud.opacity_logits = np.full(10, 1.0)
        out = densify_step(cloud, np.zeros(10), DensifyConfig(strategy=Strategy.NONE))
        self.assertEqual(len(out.cloud), 10)
        np.testing.assert_array_equal(out.cloud.positions, cloud.positions)
        self.assertEqual(out.report.split_counts(), [])
        self.assertFalse(out.fresh.any())

    def test_zero_fused_gradient_makes_no_hierarchical_splits(self) -> None:
        cloud = random_cloud(10, seed=7)
        cloud.opacity_logits = np.full(10, 1.0)
        out = densify_step(cloud, np.zeros(10), DensifyConfig(), hngd_grads=np.zeros(10))
        self.assertEqual(out.report.hngd_children, 0)
        self.assertEqual(len(out.cloud), 10)

    def test_prune_and_clone(self) -> None:
        cloud = random_cloud(4, seed=8, log_scale_range=(-6.0, -5.0))
        cloud.opacity_logits = np.array([2.0, 2.0, -9.0, 2.0])
        cfg = DensifyConfig(strategy=Strategy.NONE)
        out = densify_step(cloud, np.array([0.0, 1.0, 1.0, 0.0]), cfg, scene_extent=10.0)
        self.assertEqual(out.report.pruned, 1)
        self.assertEqual(out.report.cloned, 1)
        self.assertEqual(out.origin.tolist(), [0, 1, 3, 1])
        self.assertEqual(out.fresh.tolist(), [False, False, False, True])

    def test_levels_recorded_and_not_repeated(self) -> None:
        cloud = random_cloud(3, seed=9)
        cloud.opacity_logits = np.full(3, 2.0)
        cfg = DensifyConfig(strategy=Strategy.SPARSE)
        first = densify_step(cloud, np.zeros(3), cfg, hngd_grads=np.array([0.0, 1.2, 2.1]))
        self.assertEqual(first.report.split_counts(), [1, 0, 1])
        self.assertEqual(len(first.cloud), 1 + 2 + 8)
        self.assertEqual(sorted(first.levels.tolist()), [0] + [1] * 2 + [3] * 8)
        again = densify_step(first.cloud, np.zeros(11), cfg, hngd_grads=np.full(11, 1.2), levels=first.levels)
        self.assertEqual(len(again.cloud), 2 + 8 + 2)

    def test_dense_never_fewer_than_sparse(self) -> None:
        rng = np.random.default_rng(10)
        cloud = random_cloud(12, seed=10)
        cloud.opacity_logits = np.full(12, 2.0)
        grads = rng.uniform(0.0, 5.0, size=12)
        dense = densify_step(cloud, np.zeros(12), DensifyConfig(strategy=Strategy.DENSE), hngd_grads=grads)
        sparse = densify_step(cloud, np.zeros(12), DensifyConfig(strategy=Strategy.SPARSE), hngd_grads=grads)
        self.assertGreaterEqual(len(dense.cloud), len(sparse.cloud))

    def test_budget_truncates_highest_levels_first(self) -> None:
        cloud = random_cloud(4, seed=11)
        cloud.opacity_logits = np.full(4, 2.0)
        cfg = DensifyConfig(strategy=Strategy.SPARSE, max_gaussians=20)
        out = densify_step(cloud, np.zeros(4), cfg, hngd_grads=np.array([0.0, 1.0, 3.6, 3.6]))
        self.assertTrue(out.report.truncated)
        self.assertLessEqual(len(out.cloud), 20)

    def test_shell_children_stay_on_shell(self) -> None:
        cloud = make_synthetic(SyntheticKind.SHELL, seed=0).truth
        cfg = DensifyConfig()
        self.assertEqual(cfg.grid_resolution, 128)
        sampled, field = sample_fused_gradient(cloud, cfg)
        centre = tuple(field.grid.voxel_of(np.zeros((1, 3)))[0])
        self.assertEqual(field.fused[centre], 0.0)
        # one densify interval accumulates samples_per_interval samples
        accumulated = sampled * cfg.samples_per_interval
        out = densify_step(cloud, np.zeros(len(cloud)), cfg, hngd_grads=accumulated)
        self.assertGreater(out.report.hngd_children, 0)
        radii = np.linalg.norm(out.cloud.positions[out.fresh], axis=1)
        near = np.abs(radii - SHELL_RADIUS) <= 2.0 * field.grid.voxel_size
        self.assertGreaterEqual(float(near.mean()), 0.9)
        sparse = densify_step(cloud, np.zeros(len(cloud)), DensifyConfig(strategy=Strategy.SPARSE), hngd_grads=accumulated)
        self.assertGreaterEqual(out.report.hngd_children, sparse.report.hngd_children)


class TestDensifyStats(unittest.TestCase):
    def test_accumulate_and_restart(self) -> None:
        stats = DensifyStats.zeros(4)
        stats.add_screen(np.array([0, 2]), np.array([1.0, 3.0]))
        stats.add_screen(np.array([2]), np.array([5.0]))
        np.testing.assert_allclose(stats.mean_screen_grad, [1.0, 0.0, 4.0, 0.0])
        stats.add_hngd(np.array([1, 3]), np.array([9.0, 0.5, 9.0, 0.25]))
        np.testing.assert_allclose(stats.hngd_accum, [0.0, 0.5, 0.0, 0.25])
        fresh = DensifyStats.restart(np.array([0, 1, 2, 3]))
        self.assertEqual(fresh.levels.tolist(), [0, 1, 2, 3])
        self.assertFalse(fresh.visits.any())


class TestSyntheticShell(unittest.TestCase):
    def test_fused_gradient_sampled_on_shell_scene(self) -> None:
        scene = make_synthetic(SyntheticKind.SHELL, seed=0)
        sampled, _ = sample_fused_gradient(scene.truth, DensifyConfig(grid_resolution=24))
        self.assertEqual(sampled.shape, (len(scene.truth),))
        self.assertTrue(np.all(np.isfinite(sampled)))


if __name__ == "__main__":
    unittest.main()
