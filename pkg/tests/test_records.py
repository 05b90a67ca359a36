"""Tests for splatting/records.py (training log lines).

Run with:
    python -m unittest tests.test_records
"""

from __future__ import annotations

import math
import sys
import unittest
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from splatting.records import (
    CSV_HEADER,
    INFINITE_TOKEN,
    RecordValidationError,
    TrainRecord,
    make_record,
    parse_record,
    validate_record,
)


class TestCsvLines(unittest.TestCase):
    def test_header(self) -> None:
        self.assertEqual(CSV_HEADER.split(","), ["iteration", "loss", "psnr", "gaussian_count", "split_counts"])

    def test_line_layout(self) -> None:
        record = make_record(12, 0.125, 31.5, 400, [3, 0, 1])
        self.assertEqual(record.to_csv_line(), "12,0.125,31.5,400,3;0;1")
        self.assertEqual(make_record(1, 0.5, 20.0, 9).to_csv_line(), "1,0.5,20.0,9,")

    def test_parse_inverts_to_csv_line(self) -> None:
        for record in (
            make_record(3, 0.1 + 0.2, 27.123456789, 1000, [5, 6]),
            make_record(0, 0.0, math.inf, 0),
        ):
            with self.subTest(record=record):
                self.assertEqual(parse_record(record.to_csv_line() + "\n"), record)

    def test_infinite_psnr_token(self) -> None:
        line = make_record(4, 0.0, math.inf, 10).to_csv_line()
        self.assertEqual(line.split(",")[2], INFINITE_TOKEN)
        self.assertTrue(math.isinf(parse_record(line).psnr))

    def test_malformed_lines(self) -> None:
        for line in ("1,2,3", "x,0.1,20,5,", "1,0.1,20,5,1;a", "1,-0.1,20,5,", "1,0.1,nan,5,", "-1,0.1,20,5,"):
            with self.subTest(line=line), self.assertRaises(RecordValidationError):
                parse_record(line)


class TestValidateRecord(unittest.TestCase):
    def _valid(self) -> dict:
        return {"iteration": 1, "loss": 0.2, "psnr": 25.0, "gaussian_count": 7, "split_counts": [1, 2]}

    def test_valid_record(self) -> None:
        validate_record(self._valid())

    def test_failures(self) -> None:
        cases = [
            ("missing", {k: v for k, v in self._valid().items() if k != "loss"}),
            ("bool iteration", {**self._valid(), "iteration": True}),
            ("float count", {**self._valid(), "gaussian_count": 7.0}),
            ("infinite loss", {**self._valid(), "loss": math.inf}),
            ("string psnr", {**self._valid(), "psnr": "25"}),
            ("negative split", {**self._valid(), "split_counts": [1, -2]}),
            ("unknown key", {**self._valid(), "ssim": 0.9}),
        ]
        for label, record in cases:
            with self.subTest(label=label), self.assertRaises(RecordValidationError):
                validate_record(record)
        with self.assertRaises(RecordValidationError):
            validate_record([1, 2, 3])  # type: ignore[arg-type]

    def test_record_is_frozen(self) -> None:
        record = TrainRecord(1, 0.1, 20.0, 3)
        with self.assertRaises(AttributeError):
            record.loss = 0.0  # type: ignore[misc]


if __name__ == "__main__":
    unittest.main()
