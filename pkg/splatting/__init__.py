"""CPU Gaussian splatting with light-decomposition shading and hierarchical densification."""

from splatting.camera import Camera, project_gaussian
from splatting.hngd import DensifyConfig, Strategy, densify_step
from splatting.metrics import psnr, ssim
from splatting.raster import Image, render, render_reference
from splatting.scene import Gaussian3D, GaussianCloud
from splatting.shading import ShadingConfig, ShadingMode, shade_gaussian
from splatting.train import TrainConfig, train

__all__ = [
    "Camera",
    "DensifyConfig",
    "Gaussian3D",
    "GaussianCloud",
    "Image",
    "ShadingConfig",
    "ShadingMode",
    "Strategy",
    "TrainConfig",
    "densify_step",
    "project_gaussian",
    "psnr",
    "render",
    "render_reference",
    "shade_gaussian",
    "ssim",
    "train",
]
