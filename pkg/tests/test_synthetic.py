"""Tests for splatting/synthetic.py.

Run with:
    python -m unittest tests.test_synthetic
"""

from __future__ import annotations

import sys
import unittest
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from splatting.raster import render_reference
from splatting.scene import FIELD_NAMES, quat_to_rotmat
from splatting.synthetic import (
    GRID_SIDE,
    IMAGE_SIZE,
    PLANE_COLS,
    PLANE_ROWS,
    RING_VIEWS,
    SHELL_POINTS,
    SHELL_RADIUS,
    SyntheticKind,
    make_synthetic,
    ring_cameras,
)


class TestSyntheticScenes(unittest.TestCase):
    def test_same_seed_is_bit_identical(self) -> None:
        a = make_synthetic("grid", seed=5)
        b = make_synthetic(SyntheticKind.GRID, seed=5)
        for name in FIELD_NAMES:
            np.testing.assert_array_equal(getattr(a.truth, name), getattr(b.truth, name))
            np.testing.assert_array_equal(getattr(a.cloud, name), getattr(b.cloud, name))
        for (_, ia), (_, ib) in zip(a.views, b.views):
            np.testing.assert_array_equal(ia.pixels, ib.pixels)

    def test_different_seeds_differ(self) -> None:
        a = make_synthetic("grid", seed=1)
        b = make_synthetic("grid", seed=2)
        self.assertFalse(np.array_equal(a.truth.sh_diffuse, b.truth.sh_diffuse))

    def test_sizes(self) -> None:
        expected = {
            SyntheticKind.SHELL: SHELL_POINTS,
            SyntheticKind.GRID: GRID_SIDE**3,
            SyntheticKind.MIRROR_LIT: PLANE_COLS * PLANE_ROWS,
        }
        for kind, count in expected.items():
            with self.subTest(kind=kind.value):
                scene = make_synthetic(kind, seed=0)
                self.assertEqual(len(scene.truth), count)
                self.assertEqual(len(scene.cloud), count)
                self.assertEqual(len(scene.views), RING_VIEWS)
                for cam, img in scene.views:
                    self.assertEqual((cam.width, cam.height), (IMAGE_SIZE, IMAGE_SIZE))
                    self.assertEqual(img.shape, (IMAGE_SIZE, IMAGE_SIZE))
                    self.assertTrue(np.all((img.pixels >= 0.0) & (img.pixels <= 1.0)))
        self.assertEqual(GRID_SIDE**3, 64)
        self.assertEqual(PLANE_COLS * PLANE_ROWS, 20)

    def test_shell_lies_on_sphere(self) -> None:
        scene = make_synthetic("shell", seed=4)
        np.testing.assert_allclose(np.linalg.norm(scene.truth.positions, axis=1), SHELL_RADIUS, atol=1e-12)

    def test_shell_discs_are_tangent(self) -> None:
        truth = make_synthetic("shell", seed=2).truth
        axes = quat_to_rotmat(truth.rotations)
        outward = truth.positions / SHELL_RADIUS
        np.testing.assert_allclose(axes[:, :, 2], outward, atol=1e-12)
        self.assertTrue(np.all(truth.scales[:, 2] < truth.scales[:, 0]))

    def test_views_are_not_blank(self) -> None:
        scene = make_synthetic("shell", seed=0)
        for _, img in scene.views:
            self.assertGreater(float(img.pixels.max()), 0.1)

    def test_initial_cloud_is_perturbed(self) -> None:
        scene = make_synthetic("mirror_lit", seed=0)
        delta = np.abs(scene.cloud.positions - scene.truth.positions)
        self.assertGreater(float(delta.max()), 0.0)
        self.assertLess(float(delta.max()), 0.1)
        np.testing.assert_array_equal(scene.cloud.specular_logits, np.zeros(len(scene.cloud)))

    def test_mirror_lit_carries_unit_light(self) -> None:
        scene = make_synthetic("mirror_lit", seed=0)
        self.assertIsNotNone(scene.shading.light_direction)
        self.assertAlmostEqual(float(np.linalg.norm(scene.shading.light_direction)), 1.0, places=12)

    def test_specular_weight_brightens_mirror(self) -> None:
        scene = make_synthetic("mirror_lit", seed=0)
        cam = scene.cameras[0]
        glossy = scene.truth.copy()
        glossy.specular_logits = np.full(len(glossy), 30.0)
        matte = scene.truth.copy()
        matte.specular_logits = np.full(len(matte), -30.0)
        bright = render_reference(cam, glossy, scene.shading)
        dull = render_reference(cam, matte, scene.shading)
        self.assertGreater(float(bright.pixels.max()), float(dull.pixels.max()))

    def test_unknown_kind(self) -> None:
        with self.assertRaises(ValueError):
            make_synthetic("teapot")


class TestRingCameras(unittest.TestCase):
    def test_ring_geometry(self) -> None:
        cams = ring_cameras(radius=3.0, height=1.0, count=4, size=32)
        self.assertEqual(len(cams), 4)
        for cam in cams:
            center = cam.center
            self.assertAlmostEqual(float(np.hypot(center[0], center[1])), 3.0, places=9)
            self.assertAlmostEqual(float(center[2]), 1.0, places=9)
            # origin projects to the principal point
            p = cam.rotation @ np.zeros(3) + cam.translation
            self.assertGreater(float(p[2]), 0.0)
            self.assertAlmostEqual(float(p[0]), 0.0, places=9)
            self.assertAlmostEqual(float(p[1]), 0.0, places=9)


if __name__ == "__main__":
    unittest.main()
