"""8-bit PNG image I/O."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from splatting.errors import FormatError
from splatting.raster import Image


def quantize(img: Image) -> np.ndarray:
    """round(v * 255) as uint8."""
    return np.round(np.clip(img.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(path: Path | str, img: Image) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(quantize(img), mode="RGB").save(str(path), format="PNG")


def load_image(path: Path | str) -> Image:
    path = Path(path)
    try:
        with PILImage.open(str(path)) as pil:
            data = np.asarray(pil.convert("RGB"), dtype=np.float64)
    except (OSError, UnidentifiedImageError) as e:
        raise FormatError(str(path), f"unreadable image: {e}") from e
    return Image(data / 255.0)
