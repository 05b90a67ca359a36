"""Voxel-field dump used by ``densify-inspect``.

Layout (little-endian):

    magic        8 bytes  b"SPLGRID1"
    dims         3 x <i4
    components   <i4      1 for scalar fields, 3 for vector fields
    voxel_size   <f8
    origin       3 x <f8
    values       nx * ny * nz * components x <f4, C order
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from splatting.errors import FormatError

MAGIC = b"SPLGRID1"
_HEADER = np.dtype([("dims", "<i4", (3,)), ("components", "<i4"), ("voxel_size", "<f8"), ("origin", "<f8", (3,))])


@dataclass
class GridDump:
    values: np.ndarray
    origin: np.ndarray
    voxel_size: float

    @property
    def dims(self) -> tuple[int, int, int]:
        nx, ny, nz = self.values.shape[:3]
        return nx, ny, nz

    @property
    def components(self) -> int:
        return 1 if self.values.ndim == 3 else int(self.values.shape[3])


def write_grid(path: Path | str, values: np.ndarray, origin: np.ndarray, voxel_size: float) -> None:
    values = np.asarray(values)
    if values.ndim not in (3, 4):
        raise ValueError(f"expected a (nx, ny, nz[, c]) array, got shape {values.shape}")
    header = np.zeros(1, dtype=_HEADER)
    header["dims"] = values.shape[:3]
    header["components"] = 1 if values.ndim == 3 else values.shape[3]
    header["voxel_size"] = voxel_size
    header["origin"] = np.asarray(origin, dtype=np.float64).reshape(3)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(MAGIC + header.tobytes() + np.ascontiguousarray(values, dtype="<f4").tobytes())


def read_grid(path: Path | str) -> GridDump:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FormatError(str(path), f"unreadable grid: {e}") from e
    if data[: len(MAGIC)] != MAGIC:
        raise FormatError(str(path), "not a grid dump (bad magic)", offset=0)
    start = len(MAGIC)
    if len(data) < start + _HEADER.itemsize:
        raise FormatError(str(path), "truncated header", offset=start)
    header = np.frombuffer(data, dtype=_HEADER, count=1, offset=start)[0]
    dims = tuple(int(d) for d in header["dims"])
    comps = int(header["components"])
    if min(dims) <= 0 or comps not in (1, 3):
        raise FormatError(str(path), f"bad header dims={dims} components={comps}", offset=start)
    body = start + _HEADER.itemsize
    expected = int(np.prod(dims)) * comps * 4
    if len(data) - body != expected:
        raise FormatError(str(path), f"expected {expected} value bytes, found {len(data) - body}", offset=body)
    values = np.frombuffer(data, dtype="<f4", offset=body).astype(np.float64)
    shape = dims if comps == 1 else dims + (comps,)
    return GridDump(values=values.reshape(shape), origin=np.array(header["origin"], dtype=np.float64), voxel_size=float(header["voxel_size"]))
