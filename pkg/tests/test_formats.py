"""Tests for splatting/formats (points, cameras, checkpoints, images, grids).

Run with:
    python -m unittest tests.test_formats
"""

from __future__ import annotations

import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np
import yaml

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from splatting.errors import FormatError
from splatting.formats.cameras import camera_to_dict, load_cameras, orthonormalize, save_cameras, shading_override
from splatting.formats.checkpoint import (
    MAGIC,
    decode_checkpoint,
    encode_checkpoint,
    is_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from splatting.formats.grids import read_grid, write_grid
from splatting.formats.images import load_image, quantize, save_image
from splatting.formats.points import INIT_OPACITY, cloud_from_points, load_points, save_points
from splatting.hngd import DensifyConfig, Strategy
from splatting.raster import Image, render
from splatting.scene import FIELD_NAMES
from splatting.sh import SH_C0
from splatting.shading import ShadingConfig, ShadingMode
from splatting.train import TrainConfig, train
from tests.fixtures import front_camera, random_cloud


class _TempDirCase(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self) -> None:
        self._tmp.cleanup()


class TestPoints(_TempDirCase):
    def test_text_with_colors_and_comments(self) -> None:
        path = self.tmp / "pts.txt"
        path.write_text("# x y z r g b\n0 0 0 1 0 0\n\n1.0, 0, 0, 0, 1, 0\n0 2 0 0 0 1\n", encoding="utf-8")
        cloud = load_points(path)
        self.assertEqual(len(cloud), 3)
        np.testing.assert_allclose(cloud.opacities, np.full(3, INIT_OPACITY))
        np.testing.assert_allclose(cloud.sh_diffuse[0, 0], (np.array([1.0, 0.0, 0.0]) - 0.5) / SH_C0)
        self.assertFalse(cloud.sh_diffuse[:, 1:].any())
        np.testing.assert_array_equal(cloud.rotations[:, 0], np.ones(3))

    def test_neighbour_scales(self) -> None:
        cloud = cloud_from_points(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]))
        # nearest three from the origin: 1, 2, 3
        np.testing.assert_allclose(cloud.log_scales[0], np.full(3, np.log(2.0)))
        np.testing.assert_allclose(cloud.sh_diffuse[:, 0], np.zeros((4, 3)), atol=1e-15)

    def test_single_point_gets_floor_scale(self) -> None:
        cloud = cloud_from_points(np.zeros((1, 3)))
        np.testing.assert_allclose(cloud.log_scales, np.full((1, 3), np.log(1e-7)))

    def test_ply_round_trip_divides_colors(self) -> None:
        path = self.tmp / "pts.ply"
        positions = np.array([[0.5, -1.0, 2.0], [1.0, 1.0, 1.0]])
        save_points(path, positions, np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))
        cloud = load_points(path)
        np.testing.assert_allclose(cloud.positions, positions)
        np.testing.assert_allclose(cloud.sh_diffuse[1, 0], (np.array([0.0, 0.0, 1.0]) - 0.5) / SH_C0)

    def test_errors_carry_line_numbers(self) -> None:
        path = self.tmp / "bad.txt"
        path.write_text("0 0 0\n1 2\n", encoding="utf-8")
        with self.assertRaises(FormatError) as ctx:
            load_points(path)
        self.assertEqual(ctx.exception.line, 2)
        path.write_text("0 0 0\n1 2 x\n", encoding="utf-8")
        with self.assertRaises(FormatError):
            load_points(path)
        path.write_text("# only comments\n", encoding="utf-8")
        with self.assertRaises(FormatError):
            load_points(path)
        with self.assertRaises(FormatError):
            load_points(self.tmp / "missing.txt")


class TestCameras(_TempDirCase):
    def test_round_trip_with_images_and_shading(self) -> None:
        cams = [front_camera(size=32), front_camera(size=32, distance=5.0)]
        path = self.tmp / "cams" / "cameras.yaml"
        save_cameras(path, cams, ["images/a.png", None], {"mode": "diffuse_only", "light_direction": (0.0, 0.0, 1.0)})
        loaded = load_cameras(path)
        self.assertEqual(len(loaded), 2)
        for a, b in zip(cams, loaded.cameras):
            np.testing.assert_allclose(b.world_to_cam, a.world_to_cam, atol=1e-12)
            self.assertEqual((b.width, b.height), (a.width, a.height))
        self.assertEqual(loaded.image_paths, [path.parent / "images/a.png", None])
        shading = shading_override(loaded, ShadingConfig())
        self.assertIs(shading.mode, ShadingMode.DIFFUSE_ONLY)
        self.assertEqual(shading.light_direction, (0.0, 0.0, 1.0))

    def test_slightly_drifted_rotation_is_repaired(self) -> None:
        view = camera_to_dict(front_camera())
        view["world_to_cam"][0][0] += 2e-4
        doc_path = self.tmp / "drift.yaml"
        doc_path.write_text(yaml.safe_dump({"views": [view]}), encoding="utf-8")
        loaded = load_cameras(doc_path)
        rot = loaded.cameras[0].rotation
        np.testing.assert_allclose(rot @ rot.T, np.eye(3), atol=1e-9)

    def test_orthonormalize(self) -> None:
        rng = np.random.default_rng(0)
        rot = orthonormalize(np.eye(3) + 1e-4 * rng.normal(size=(3, 3)))
        np.testing.assert_allclose(rot @ rot.T, np.eye(3), atol=1e-12)
        self.assertAlmostEqual(float(np.linalg.det(rot)), 1.0, places=12)

    def test_rejects_bad_files(self) -> None:
        path = self.tmp / "bad.yaml"
        cases = [
            "views: 3\n",
            "views:\n  - {width: 8}\n",
            "views:\n  - {width: 8, height: 8, fx: 1, fy: 1, cx: 4, cy: 4, world_to_cam: [[2,0,0,0],[0,1,0,0],[0,0,1,0]]}\n",
            "views:\n  - {width: 8, height: 8, fx: 1, fy: 1, cx: 4, cy: 4, world_to_cam: [[1,0,0,0],[0,1,0,0],[0,0,1,0]], lens: 3}\n",
            "views: [\n",
        ]
        for text in cases:
            path.write_text(text, encoding="utf-8")
            with self.assertRaises(FormatError, msg=text):
                load_cameras(path)


class TestCheckpoint(_TempDirCase):
    def test_bit_exact_round_trip(self) -> None:
        cloud = random_cloud(7, seed=1)
        cloud.global_light = np.array([0.5, 0.25, 1.0 / 3.0])
        path = self.tmp / "scene.ckpt"
        save_checkpoint(path, cloud, {"train": {"iterations": 10}})
        self.assertTrue(is_checkpoint(path))
        loaded, config = load_checkpoint(path)
        for name in FIELD_NAMES:
            np.testing.assert_array_equal(getattr(loaded, name), getattr(cloud, name))
        np.testing.assert_array_equal(loaded.global_light, cloud.global_light)
        self.assertEqual(config, {"train": {"iterations": 10}})
        self.assertEqual(encode_checkpoint(loaded, config), path.read_bytes())

    def test_trained_cloud_round_trips_bit_exact(self) -> None:
        cam = front_camera(size=16)
        truth = random_cloud(4, seed=5, spread=0.5, log_scale_range=(-1.5, -1.0))
        views = [(cam, render(cam, truth, ShadingConfig(), threads=1))]
        result = train(
            random_cloud(4, seed=6, spread=0.5, log_scale_range=(-1.5, -1.0)),
            views,
            TrainConfig(iterations=2),
            DensifyConfig(strategy=Strategy.NONE),
            ShadingConfig(),
            threads=1,
        )
        loaded, _ = decode_checkpoint(encode_checkpoint(result.cloud))
        for name in FIELD_NAMES:
            np.testing.assert_array_equal(getattr(loaded, name), getattr(result.cloud, name), err_msg=name)
        np.testing.assert_array_equal(loaded.global_light, result.cloud.global_light)

    def test_empty_cloud(self) -> None:
        cloud, config = decode_checkpoint(encode_checkpoint(random_cloud(0)))
        self.assertEqual(len(cloud), 0)
        self.assertEqual(config, {})

    def test_corrupt_data(self) -> None:
        data = encode_checkpoint(random_cloud(2))
        with self.assertRaises(FormatError) as ctx:
            decode_checkpoint(b"NOTACKPT" + data[8:])
        self.assertEqual(ctx.exception.offset, 0)
        with self.assertRaises(FormatError):
            decode_checkpoint(data[:-4])
        with self.assertRaises(FormatError):
            decode_checkpoint(data + b"\0")
        self.assertTrue(data.startswith(MAGIC))
        self.assertFalse(is_checkpoint(self.tmp / "missing.ckpt"))


class TestImages(_TempDirCase):
    def test_png_round_trip_within_half_step(self) -> None:
        img = Image(np.random.default_rng(2).uniform(size=(9, 13, 3)))
        path = self.tmp / "img.png"
        save_image(path, img)
        loaded = load_image(path)
        self.assertEqual(loaded.shape, (9, 13))
        self.assertLessEqual(float(np.max(np.abs(loaded.pixels - img.pixels))), 1.0 / 510.0 + 1e-12)

    def test_quantize_clips(self) -> None:
        q = quantize(Image(np.array([[[-0.5, 0.5, 2.0]]])))
        self.assertEqual(q.tolist(), [[[0, 128, 255]]])

    def test_unreadable_image(self) -> None:
        path = self.tmp / "junk.png"
        path.write_bytes(b"not a png")
        with self.assertRaises(FormatError):
            load_image(path)


class TestGrids(_TempDirCase):
    def test_scalar_and_vector_round_trip(self) -> None:
        rng = np.random.default_rng(3)
        for values in (rng.uniform(size=(4, 5, 6)), rng.uniform(size=(4, 5, 6, 3))):
            path = self.tmp / "grid.bin"
            write_grid(path, values, np.array([0.5, -1.0, 2.0]), 0.25)
            dump = read_grid(path)
            self.assertEqual(dump.dims, (4, 5, 6))
            self.assertEqual(dump.components, 1 if values.ndim == 3 else 3)
            np.testing.assert_array_equal(dump.values, values.astype(np.float32).astype(np.float64))
            np.testing.assert_array_equal(dump.origin, [0.5, -1.0, 2.0])
            self.assertEqual(dump.voxel_size, 0.25)

    def test_truncated_grid(self) -> None:
        path = self.tmp / "grid.bin"
        write_grid(path, np.zeros((4, 4, 4)), np.zeros(3), 1.0)
        path.write_bytes(path.read_bytes()[:-8])
        with self.assertRaises(FormatError):
            read_grid(path)


if __name__ == "__main__":
    unittest.main()
