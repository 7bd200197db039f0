import numpy as np
import pytest

from tvsim.diagnostics.trajectory import DRIFT_TOL, MIN_ROWS, trajectory_assertions
from tvsim.errors import InsufficientLogError
from tvsim.train_log import TrainLog, TrainLogRow


def _log(aVa_fn, bVb_fn, epochs=range(0, 110, 10)):
    log = TrainLog(K=2)
    for e in epochs:
        a = aVa_fn(e)
        b = bVb_fn(e)
        log.append(
            TrainLogRow(
                epoch=e,
                train_ce=1.0,
                test01={"icl": 0.0},
                aVa=[a, 1.1 * a],
                bVb=[b, -b],
                aKQa=[0.0, 0.0],
                bKQb=[0.0, 0.0],
                v_cross_max=0.0,
                kq_cross_max=0.0,
                cos_a_star=0.0,
                cos_b_max=0.0,
                cos_other_max=0.0,
                attn_max=0.0,
                attn_entropy=0.0,
                confidence=0.0,
            )
        )
    return log


def _concave(e):
    return 0.01 + float(np.sqrt(e))


def _slow(e):
    return 1.0 + 1e-4 * e


def test_qa_like_trajectory_passes_every_check():
    log = _log(_concave, lambda e: 0.001)
    report = trajectory_assertions(log, "qa", reference_slope=0.05)
    assert report.passed, report.to_dict()
    assert report.check("deceleration").value < report.check("deceleration").threshold
    assert report.reference_slope == 0.05
    assert report.observed_slope > 0


def test_memorization_threshold_depends_on_training_distribution():
    log = _log(_concave, lambda e: 0.5 * _concave(e))
    assert trajectory_assertions(log, "icl").check("memorization").passed
    assert not trajectory_assertions(log, "qa").check("memorization").passed
    ratio = trajectory_assertions(log, "qa_icl", icl_ratio_min=0.6).check("memorization")
    assert ratio.value == pytest.approx(0.5)
    assert not ratio.passed


def test_late_drop_fails_monotone_tail():
    log = _log(lambda e: 1.0 if e < 90 else 0.5, lambda e: 0.0)
    check = trajectory_assertions(log, "qa").check("monotone_tail")
    assert not check.passed
    assert "failing concepts: [0, 1]" in check.detail


def test_jitter_inside_the_drift_band_keeps_the_tail_increasing():
    # slow growth with dips of half the band: real drops between logged rows
    peak = 1.1 * _slow(100)
    wobble = lambda e: _slow(e) - (0.5 * DRIFT_TOL * peak if e % 20 == 10 else 0.0)
    for dist in ("qa", "icl", "qa_icl"):
        check = trajectory_assertions(_log(wobble, lambda e: 0.0), dist).check("monotone_tail")
        assert check.passed, check.detail
        assert "drop tolerance" in check.detail


def test_drop_just_beyond_the_drift_band_fails():
    peak = 1.1 * _slow(100)
    dip = lambda e: _slow(e) - (3.0 * DRIFT_TOL * peak if e == 80 else 0.0)
    check = trajectory_assertions(_log(dip, lambda e: 0.0), "icl").check("monotone_tail")
    assert not check.passed


def test_flat_tail_is_not_eventually_increasing():
    check = trajectory_assertions(_log(lambda e: min(e, 40) + 1.0, lambda e: 0.0), "icl").check("monotone_tail")
    assert not check.passed
    assert check.value == pytest.approx(0.0)


def test_accelerating_growth_fails_deceleration():
    log = _log(lambda e: 0.01 + e**2, lambda e: 0.0)
    assert not trajectory_assertions(log, "qa").check("deceleration").passed


def test_non_positive_task_diagonal_makes_ratio_undefined():
    log = _log(lambda e: -1.0 + 0.001 * e, lambda e: 0.1)
    check = trajectory_assertions(log, "icl").check("memorization")
    assert check.value is None
    assert not check.passed


def test_short_logs_and_unknown_distributions():
    short = _log(_concave, lambda e: 0.0, epochs=range(MIN_ROWS - 1))
    with pytest.raises(InsufficientLogError, match="at least 6"):
        trajectory_assertions(short, "qa")
    with pytest.raises(ValueError, match="train_dist"):
        trajectory_assertions(_log(_concave, lambda e: 0.0), "cloze")
