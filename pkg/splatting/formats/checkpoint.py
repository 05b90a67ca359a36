"""Flat little-endian checkpoint of a GaussianCloud.

Layout:

    magic            8 bytes  b"SPLATCKP"
    version          <u4
    gaussian count   <u4
    config length    <u4      bytes of the UTF-8 JSON config echo that follows
    config echo      JSON
    global_light     3 x <f8
    per-Gaussian arrays, each count x tail x <f8, in scene.PER_GAUSSIAN_FIELDS order
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from splatting.errors import FormatError
from splatting.scene import PER_GAUSSIAN_FIELDS, GaussianCloud

MAGIC = b"SPLATCKP"
VERSION = 1
_U4 = np.dtype("<u4")
_F8 = np.dtype("<f8")


def encode_checkpoint(cloud: GaussianCloud, config: Mapping[str, Any] | None = None) -> bytes:
    echo = json.dumps(dict(config or {}), sort_keys=True).encode("utf-8")
    parts = [
        MAGIC,
        np.array([VERSION, len(cloud), len(echo)], dtype=_U4).tobytes(),
        echo,
        np.asarray(cloud.global_light, dtype=_F8).tobytes(),
    ]
    for name, _ in PER_GAUSSIAN_FIELDS:
        parts.append(np.ascontiguousarray(getattr(cloud, name), dtype=_F8).tobytes())
    return b"".join(parts)


def save_checkpoint(path: Path | str, cloud: GaussianCloud, config: Mapping[str, Any] | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(cloud, config))


def decode_checkpoint(data: bytes, source: str = "<bytes>") -> tuple[GaussianCloud, dict[str, Any]]:
    offset = 0

    def take(nbytes: int, what: str) -> bytes:
        nonlocal offset
        if offset + nbytes > len(data):
            raise FormatError(source, f"truncated while reading {what}", offset=offset)
        chunk = data[offset:offset + nbytes]
        offset += nbytes
        return chunk

    if take(len(MAGIC), "magic") != MAGIC:
        raise FormatError(source, "not a splatting checkpoint (bad magic)", offset=0)
    version, count, echo_len = np.frombuffer(take(3 * _U4.itemsize, "header"), dtype=_U4)
    if int(version) != VERSION:
        raise FormatError(source, f"unsupported checkpoint version {int(version)}", offset=len(MAGIC))
    echo_start = offset
    try:
        config = json.loads(take(int(echo_len), "config echo").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(source, f"bad config echo: {e}", offset=echo_start) from e
    global_light = np.frombuffer(take(3 * _F8.itemsize, "global_light"), dtype=_F8).astype(np.float64)
    arrays: dict[str, np.ndarray] = {}
    n = int(count)
    for name, tail in PER_GAUSSIAN_FIELDS:
        size = n * int(np.prod(tail, dtype=np.int64))
        raw = np.frombuffer(take(size * _F8.itemsize, name), dtype=_F8)
        arrays[name] = raw.astype(np.float64).reshape((n,) + tail)
    if offset != len(data):
        raise FormatError(source, f"{len(data) - offset} trailing bytes", offset=offset)
    return GaussianCloud(**arrays, global_light=global_light), config


def load_checkpoint(path: Path | str) -> tuple[GaussianCloud, dict[str, Any]]:
    """Cloud and config echo stored by save_checkpoint."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FormatError(str(path), f"unreadable checkpoint: {e}") from e
    return decode_checkpoint(data, str(path))


def is_checkpoint(path: Path | str) -> bool:
    try:
        with Path(path).open("rb") as f:
            return f.read(len(MAGIC)) == MAGIC
    except OSError:
        return False
