"""Aggregation helpers for the acceptance harness."""

from __future__ import annotations

import math
from typing import Dict, Iterable, List, Optional


def safe_mean(values: Iterable[float]) -> Optional[float]:
    vals = [float(v) for v in values if v is not None and not math.isnan(float(v))]
    if not vals:
        return None
    return sum(vals) / float(len(vals))


def tail_mean(values: List[Optional[float]], frac: float = 0.1) -> Optional[float]:
    """
    Mean over the last `frac` share of entries (at least one), skipping blanks.

    Used for "averaged over the final 10% of epochs" style criteria.
    """
    if not 0 < frac <= 1:
        raise ValueError(f"frac must be in (0, 1], got {frac}")
    present = [v for v in values if v is not None]
    if not present:
        return None
    n = max(1, int(math.ceil(len(present) * frac)))
    return safe_mean(present[-n:])


def pass_rate(flags: Iterable[bool]) -> Optional[float]:
    return safe_mean(1.0 if f else 0.0 for f in flags)


def seed_stats(values: Iterable[Optional[float]]) -> Dict[str, Optional[float] | int]:
    """mean / min / max over seeds, ignoring missing values."""
    vals = [float(v) for v in values if v is not None]
    return {
        "mean": safe_mean(vals),
        "min": min(vals) if vals else None,
        "max": max(vals) if vals else None,
        "n": len(vals),
    }


def at_most(value: Optional[float], threshold: float) -> Optional[bool]:
    return None if value is None else value <= threshold


def at_least(value: Optional[float], threshold: float) -> Optional[bool]:
    return None if value is None else value >= threshold


def first_epoch_at_most(rows: Iterable[Dict[str, Optional[float]]], columns: Iterable[str], threshold: float) -> Optional[int]:
    """First logged epoch where every listed column is present and <= threshold."""
    cols = list(columns)
    for row in rows:
        vals = [row.get(c) for c in cols]
        if all(v is not None and v <= threshold for v in vals):
            return int(row["epoch"])
    return None


def all_passed(criteria: Iterable[Dict[str, Optional[bool]]]) -> bool:
    """True when no evaluated criterion failed; unevaluated (None) entries are skipped."""
    return all(v for block in criteria for v in block.values() if v is not None)
