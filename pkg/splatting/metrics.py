"""PSNR and SSIM, plus the analytic SSIM gradient used by the training loss."""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import convolve2d

from splatting.errors import DimensionMismatchError
from splatting.raster import Image, require_same_size

INFINITE = math.inf

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 1.0
C1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
C2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2


def _pixels(img: Image | np.ndarray) -> np.ndarray:
    return img.pixels if isinstance(img, Image) else np.asarray(img, dtype=np.float64)


def _check_pair(a: Image | np.ndarray, b: Image | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(a, Image) and isinstance(b, Image):
        require_same_size(a, b)
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise DimensionMismatchError(f"image shapes differ: {pa.shape} vs {pb.shape}")
    return pa, pb


def psnr(a: Image | np.ndarray, b: Image | np.ndarray) -> float:
    """10 log10(1 / MSE) with peak 1.0; INFINITE for identical images."""
    pa, pb = _check_pair(a, b)
    mse = float(np.mean((pa - pb) ** 2))
    if mse == 0.0:
        return INFINITE
    return 10.0 * math.log10(1.0 / mse)


def format_psnr(value: float) -> str:
    return "INFINITE" if math.isinf(value) else f"{value:.4f}"


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    win = np.outer(g, g)
    return win / win.sum()


def _filter(x: np.ndarray, win: np.ndarray) -> np.ndarray:
    return convolve2d(x, win, mode="valid")


def _filter_adjoint(g: np.ndarray, win: np.ndarray) -> np.ndarray:
    return convolve2d(g, win[::-1, ::-1], mode="full")


def _local_stats(x: np.ndarray, y: np.ndarray, win: np.ndarray):
    mu_x, mu_y = _filter(x, win), _filter(y, win)
    e_xx, e_yy, e_xy = _filter(x * x, win), _filter(y * y, win), _filter(x * y, win)
    a1 = 2.0 * mu_x * mu_y + C1
    a2 = 2.0 * (e_xy - mu_x * mu_y) + C2
    b1 = mu_x * mu_x + mu_y * mu_y + C1
    b2 = (e_xx - mu_x * mu_x) + (e_yy - mu_y * mu_y) + C2
    return mu_x, mu_y, a1, a2, b1, b2


def _check_ssim_size(pa: np.ndarray) -> None:
    if pa.shape[0] < SSIM_WINDOW or pa.shape[1] < SSIM_WINDOW:
        raise DimensionMismatchError(
            f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {pa.shape[1]}x{pa.shape[0]}"
        )


def ssim(a: Image | np.ndarray, b: Image | np.ndarray) -> float:
    """Mean local SSIM (11x11 Gaussian window, sigma 1.5), averaged over channels."""
    pa, pb = _check_pair(a, b)
    _check_ssim_size(pa)
    win = gaussian_window()
    total = 0.0
    for ch in range(pa.shape[2]):
        _, _, a1, a2, b1, b2 = _local_stats(pa[..., ch], pb[..., ch], win)
        total += float(np.mean((a1 * a2) / (b1 * b2)))
    return total / pa.shape[2]


def ssim_with_grad(a: Image | np.ndarray, b: Image | np.ndarray) -> tuple[float, np.ndarray]:
    """SSIM(a, b) and its gradient with respect to a's pixels."""
    pa, pb = _check_pair(a, b)
    _check_ssim_size(pa)
    win = gaussian_window()
    channels = pa.shape[2]
    grad = np.zeros_like(pa)
    total = 0.0
    for ch in range(channels):
        x, y = pa[..., ch], pb[..., ch]
        mu_x, mu_y, a1, a2, b1, b2 = _local_stats(x, y, win)
        denom = b1 * b2
        s_map = (a1 * a2) / denom
        total += float(np.mean(s_map))
        scale = 1.0 / (s_map.size * channels)
        d_mu_x = (2.0 * mu_y * (a2 - a1) / denom + 2.0 * mu_x * s_map * (1.0 / b2 - 1.0 / b1)) * scale
        d_e_xx = (-s_map / b2) * scale
        d_e_xy = (2.0 * a1 / denom) * scale
        grad[..., ch] = (
            _filter_adjoint(d_mu_x, win)
            + 2.0 * x * _filter_adjoint(d_e_xx, win)
            + y * _filter_adjoint(d_e_xy, win)
        )
    return total / channels, grad
