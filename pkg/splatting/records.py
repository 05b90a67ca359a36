"""Per-iteration training log records.

Records go to stdout (or a file) as one comma-separated line each:

    iteration,loss,psnr,gaussian_count,split_counts

split_counts is the ';'-joined per-level count of hierarchical splits made in that
iteration, empty when no densification ran. psnr is INFINITE for a perfect render.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

CSV_HEADER = "iteration,loss,psnr,gaussian_count,split_counts"
REQUIRED_KEYS = frozenset({"iteration", "loss", "psnr", "gaussian_count"})
INFINITE_TOKEN = "INFINITE"


class RecordValidationError(ValueError):
    """Raised when a training record does not match the log schema."""


@dataclass(frozen=True)
class TrainRecord:
    iteration: int
    loss: float
    psnr: float
    gaussian_count: int
    split_counts: tuple[int, ...] = field(default_factory=tuple)

    def to_csv_line(self) -> str:
        psnr = INFINITE_TOKEN if math.isinf(self.psnr) else repr(float(self.psnr))
        splits = ";".join(str(c) for c in self.split_counts)
        return f"{self.iteration},{float(self.loss)!r},{psnr},{self.gaussian_count},{splits}"


def validate_record(record: Mapping[str, Any]) -> None:
    """Validate a record mapping. Raises RecordValidationError on failure."""
    if not isinstance(record, Mapping):
        raise RecordValidationError(f"record must be a mapping, got {type(record).__name__}")
    missing = REQUIRED_KEYS - record.keys()
    if missing:
        raise RecordValidationError(f"record missing keys: {sorted(missing)}")
    _require_non_negative_int(record, "iteration")
    _require_non_negative_int(record, "gaussian_count")
    loss = record["loss"]
    if isinstance(loss, bool) or not isinstance(loss, (int, float)) or not math.isfinite(loss) or loss < 0:
        raise RecordValidationError(f"loss must be a finite non-negative number, got {loss!r}")
    psnr = record["psnr"]
    if isinstance(psnr, bool) or not isinstance(psnr, (int, float)) or math.isnan(psnr):
        raise RecordValidationError(f"psnr must be a number, got {psnr!r}")
    splits = record.get("split_counts", ())
    if not isinstance(splits, (list, tuple)) or any(
        isinstance(c, bool) or not isinstance(c, int) or c < 0 for c in splits
    ):
        raise RecordValidationError("split_counts must be a list of non-negative integers")
    unknown = set(record.keys()) - REQUIRED_KEYS - {"split_counts"}
    if unknown:
        raise RecordValidationError(f"record has unknown keys: {sorted(unknown)}")


def make_record(
    iteration: int,
    loss: float,
    psnr: float,
    gaussian_count: int,
    split_counts: Iterable[int] = (),
) -> TrainRecord:
    data = {
        "iteration": int(iteration),
        "loss": float(loss),
        "psnr": float(psnr),
        "gaussian_count": int(gaussian_count),
        "split_counts": [int(c) for c in split_counts],
    }
    validate_record(data)
    return TrainRecord(
        iteration=data["iteration"],
        loss=data["loss"],
        psnr=data["psnr"],
        gaussian_count=data["gaussian_count"],
        split_counts=tuple(data["split_counts"]),
    )


def parse_record(line: str) -> TrainRecord:
    """Inverse of TrainRecord.to_csv_line."""
    parts = line.rstrip("\n").split(",")
    if len(parts) != 5:
        raise RecordValidationError(f"expected 5 fields, got {len(parts)}: {line!r}")
    try:
        psnr = math.inf if parts[2] == INFINITE_TOKEN else float(parts[2])
        splits = [int(c) for c in parts[4].split(";")] if parts[4] else []
        return make_record(int(parts[0]), float(parts[1]), psnr, int(parts[3]), splits)
    except ValueError as e:
        if isinstance(e, RecordValidationError):
            raise
        raise RecordValidationError(f"malformed record {line!r}: {e}") from e


def _require_non_negative_int(record: Mapping[str, Any], key: str) -> None:
    value = record.get(key)
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise RecordValidationError(f"{key} must be a non-negative integer")
