"""
Per-epoch training log and its CSV export.

The CSV header depends only on K: fixed loss/diagnostic columns followed by
one column per concept for each diagonal projection. Numbers are written with
`repr(float)` (shortest round-trip text, '.' decimal point, locale-free);
distributions not evaluated in a run leave their cell empty.
"""
# tvsim/train_log.py
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

TEST_DISTS = ("icl", "qa", "qa_icl")

_HEAD = ["epoch", "train_ce", "test01_icl", "test01_qa", "test01_qaicl"]
_TAIL = [
    "v_cross_max",
    "kq_cross_max",
    "cos_a_star",
    "cos_b_max",
    "cos_other_max",
    "attn_max",
    "attn_entropy",
    "confidence",
]


def metrics_columns(K: int) -> list[str]:
    per_k = [f"{prefix}_{k}" for prefix in ("aVa", "bVb", "aKQa", "bKQb") for k in range(K)]
    return _HEAD + per_k + _TAIL


def _test_column(dist: str) -> str:
    return "test01_qaicl" if dist == "qa_icl" else f"test01_{dist}"


@dataclass
class TrainLogRow:
    epoch: int
    train_ce: float
    test01: dict[str, float]
    aVa: list[float]
    bVb: list[float]
    aKQa: list[float]
    bKQb: list[float]
    v_cross_max: float
    kq_cross_max: float
    cos_a_star: float
    cos_b_max: float
    cos_other_max: float
    attn_max: float
    attn_entropy: float
    confidence: float

    def as_record(self) -> dict[str, float | int | None]:
        rec: dict[str, float | int | None] = {"epoch": int(self.epoch), "train_ce": float(self.train_ce)}
        for dist in TEST_DISTS:
            value = self.test01.get(dist)
            rec[_test_column(dist)] = None if value is None else float(value)
        for prefix, values in (("aVa", self.aVa), ("bVb", self.bVb), ("aKQa", self.aKQa), ("bKQb", self.bKQb)):
            for k, v in enumerate(values):
                rec[f"{prefix}_{k}"] = float(v)
        for name in _TAIL:
            rec[name] = float(getattr(self, name))
        return rec


@dataclass
class TrainLog:
    """Rows in increasing epoch order plus run-level outcome flags."""

    K: int
    rows: list[TrainLogRow] = field(default_factory=list)
    stopped_early: bool = False
    final_epoch: int | None = None
    ce_increases: int = 0

    def append(self, row: TrainLogRow) -> None:
        if self.rows and row.epoch <= self.rows[-1].epoch:
            raise ValueError(f"log epochs must increase: {row.epoch} after {self.rows[-1].epoch}")
        rec = row.as_record()
        bad = [k for k, v in rec.items() if v is not None and not math.isfinite(float(v))]
        if bad:
            raise ValueError(f"non-finite log entries at epoch {row.epoch}: {bad}")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def epochs(self) -> np.ndarray:
        return np.array([r.epoch for r in self.rows], dtype=np.int64)

    def series(self, column: str) -> np.ndarray:
        """One column across rows; missing cells become NaN."""
        values = [r.as_record().get(column) for r in self.rows]
        return np.array([np.nan if v is None else float(v) for v in values], dtype=np.float64)

    def matrix(self, prefix: str) -> np.ndarray:
        """rows x K array of a per-concept column family, e.g. 'aVa'."""
        return np.array([getattr(r, prefix) for r in self.rows], dtype=np.float64).reshape(len(self.rows), self.K)

    def summary(self) -> dict[str, Any]:
        last = self.rows[-1].as_record() if self.rows else {}
        return {
            "rows": len(self.rows),
            "stopped_early": self.stopped_early,
            "final_epoch": self.final_epoch,
            "ce_increases": self.ce_increases,
            "last": last,
        }


def _cell(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_metrics_csv(log: TrainLog, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    columns = metrics_columns(log.K)
    with p.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in log.rows:
            rec = row.as_record()
            writer.writerow([_cell(rec.get(c)) for c in columns])
    return p


def read_metrics_csv(path: str | Path) -> tuple[list[str], list[dict[str, float | None]]]:
    """Parses a metrics CSV; raises ValueError on a missing header or non-numeric cells."""
    p = Path(path)
    with p.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration as exc:
            raise ValueError(f"{p}: metrics CSV is empty (no header)") from exc
        if not header or header[:2] != ["epoch", "train_ce"]:
            raise ValueError(f"{p}: unexpected metrics header {header[:2]!r}")
        rows: list[dict[str, float | None]] = []
        for line_no, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != len(header):
                raise ValueError(f"{p}:{line_no}: expected {len(header)} cells, got {len(raw)}")
            row: dict[str, float | None] = {}
            for name, cell in zip(header, raw):
                try:
                    row[name] = None if cell == "" else float(cell)
                except ValueError as exc:
                    raise ValueError(f"{p}:{line_no}: column {name!r} is not numeric: {cell!r}") from exc
            rows.append(row)
    return header, rows


def column_values(rows: Iterable[dict[str, float | None]], column: str) -> list[float | None]:
    return [r.get(column) for r in rows]
