"""
Order-level checks on a finished training log.

    monotone_tail   over the second half of the logged rows, a_k^T W_V a_k ends
                    above its mid-run value and never drops by more than
                    DRIFT_TOL * max |a^T W_V a| between logged rows, for every k.
    deceleration    the mean per-epoch increment of a^T W_V a over the first
                    third of the log exceeds the one over the last third.
    memorization    max_k |b_k^T W_V b_k| / min_k a_k^T W_V a_k at the final
                    row: at most `qa_ratio_max` for QA training, at least
                    `icl_ratio_min` for ICL and QA-ICL training.

Thresholds come from the run config. The report also carries the observed
early slope of a^T W_V a next to a reference slope when one is supplied.
"""
# tvsim/diagnostics/trajectory.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from tvsim.errors import InsufficientLogError
from tvsim.train_log import TrainLog
from tvsim.types import QA, SAMPLE_KINDS

logger = logging.getLogger(__name__)

MIN_ROWS = 6
# relative size of a logged-row drop in a^T W_V a that still counts as "increasing"
DRIFT_TOL = 0.01


@dataclass(frozen=True)
class TrajectoryCheck:
    name: str
    passed: bool
    value: float | None
    threshold: float | None
    detail: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "threshold": self.threshold,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class TrajectoryReport:
    train_dist: str
    checks: tuple[TrajectoryCheck, ...]
    observed_slope: float
    reference_slope: float | None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> TrajectoryCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "train_dist": self.train_dist,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "observed_slope": self.observed_slope,
            "reference_slope": self.reference_slope,
        }


def _monotone_tail(epochs: np.ndarray, aVa: np.ndarray, drift_tol: float = DRIFT_TOL) -> TrajectoryCheck:
    mid = len(epochs) // 2
    tail = aVa[mid:]
    tol = drift_tol * float(np.max(np.abs(aVa)))
    drops = np.diff(tail, axis=0) < -tol
    rising = tail[-1] > tail[0]
    bad = [k for k in range(aVa.shape[1]) if np.any(drops[:, k]) or not rising[k]]
    return TrajectoryCheck(
        name="monotone_tail",
        passed=not bad,
        value=float(np.min(tail[-1] - tail[0])),
        threshold=0.0,
        detail=(
            f"from epoch {int(epochs[mid])}, drop tolerance {tol:.3e}; failing concepts: {bad}"
            if bad
            else f"from epoch {int(epochs[mid])}, drop tolerance {tol:.3e}"
        ),
    )


def _rate(epochs: np.ndarray, values: np.ndarray) -> float:
    span = float(epochs[-1] - epochs[0])
    return float(values[-1] - values[0]) / span if span > 0 else 0.0


def _deceleration(epochs: np.ndarray, mean_aVa: np.ndarray) -> TrajectoryCheck:
    n = len(epochs)
    third = max(2, n // 3)
    early = _rate(epochs[:third], mean_aVa[:third])
    late = _rate(epochs[n - third :], mean_aVa[n - third :])
    return TrajectoryCheck(
        name="deceleration",
        passed=early > late,
        value=late,
        threshold=early,
        detail=f"first-third rate {early:.3e} per epoch, last-third rate {late:.3e} per epoch",
    )


def _memorization(train_dist: str, aVa_end: np.ndarray, bVb_end: np.ndarray, qa_max: float, icl_min: float) -> TrajectoryCheck:
    a_min = float(np.min(aVa_end))
    b_max = float(np.max(np.abs(bVb_end)))
    if a_min <= 0:
        return TrajectoryCheck(
            name="memorization",
            passed=False,
            value=None,
            threshold=qa_max if train_dist == QA else icl_min,
            detail=f"min_k a^T W_V a = {a_min:.3e} is not positive; ratio undefined",
        )
    ratio = b_max / a_min
    if train_dist == QA:
        return TrajectoryCheck("memorization", ratio <= qa_max, ratio, qa_max, "QA: ratio must stay at or below threshold")
    return TrajectoryCheck("memorization", ratio >= icl_min, ratio, icl_min, f"{train_dist}: ratio must reach threshold")


def trajectory_assertions(
    log: TrainLog,
    train_dist: str,
    *,
    qa_ratio_max: float = 0.1,
    icl_ratio_min: float = 0.3,
    reference_slope: float | None = None,
) -> TrajectoryReport:
    if train_dist not in SAMPLE_KINDS:
        raise ValueError(f"train_dist must be one of {list(SAMPLE_KINDS)}, got {train_dist!r}")
    if len(log) < MIN_ROWS:
        raise InsufficientLogError(f"trajectory checks need at least {MIN_ROWS} logged epochs, got {len(log)}")

    epochs = log.epochs
    aVa = log.matrix("aVa")
    bVb = log.matrix("bVb")
    mean_aVa = np.mean(aVa, axis=1)

    checks = (
        _monotone_tail(epochs, aVa),
        _deceleration(epochs, mean_aVa),
        _memorization(train_dist, aVa[-1], bVb[-1], qa_ratio_max, icl_ratio_min),
    )
    third = max(2, len(epochs) // 3)
    report = TrajectoryReport(
        train_dist=train_dist,
        checks=checks,
        observed_slope=_rate(epochs[:third], mean_aVa[:third]),
        reference_slope=reference_slope,
    )
    for c in checks:
        if not c.passed:
            logger.info("trajectory check %s failed: %s", c.name, c.detail)
    return report
