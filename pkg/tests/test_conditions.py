import math

import pytest

from tvsim.diagnostics.conditions import Inequality, check_training_conditions
from tvsim.schema import parse_experiment_config


def _config(**overrides):
    base = {
        "d": 3000,
        "K": 2,
        "K_prime": 100,
        "M": 30,
        "J": 14,
        "N": 200,
        "sigma0": 1e-3,
        "sigma1": 5e-3,
        "sigma_p": 0.01,
        "eta": 5.0,
        "q_V": 1e-5,
        "T": 10,
        "train_dist": "qa",
    }
    base.update(overrides)
    return parse_experiment_config(base)


def test_inequality_slack_sign():
    assert Inequality("x <= 2", 1.0, "<=", 2.0).slack == pytest.approx(1.0)
    assert Inequality("x >= 2", 1.0, ">=", 2.0).passed is False
    undefined = Inequality("x <= ?", 1.0, "<=", float("nan"), defined=False)
    assert math.isnan(undefined.slack)
    assert undefined.passed is False


def test_report_lists_six_items_with_slack():
    report = check_training_conditions(_config(), C=1.0, delta=0.01)
    assert [it.item for it in report.items] == [1, 2, 3, 4, 5, 6]
    (dim,) = report.item(1).checks
    expected_rhs = 30**2 * math.log(100**2 * 200**2 * 30**2 / 0.01)
    assert dim.rhs == pytest.approx(expected_rhs)
    assert dim.passed is (3000 >= expected_rhs)
    rows = report.csv_rows()
    assert len(rows) == sum(len(it.checks) for it in report.items)
    assert {"item", "name", "slack", "passed"} <= set(rows[0])


def test_small_constant_relaxes_lower_bounds():
    loose = check_training_conditions(_config(), C=1e-6, delta=0.01)
    assert loose.item(2).passed
    assert loose.item(3).passed
    strict = check_training_conditions(_config(), C=1e6, delta=0.01)
    assert not strict.item(3).passed


def test_single_token_prefix_leaves_value_window_undefined():
    report = check_training_conditions(_config(M=1), C=1.0, delta=0.01)
    q_lower = report.item(6).checks[0]
    assert q_lower.defined is False
    assert q_lower.passed is False
    eta_cap = report.item(6).checks[3]
    assert eta_cap.defined is False


def test_invalid_constants_are_rejected():
    with pytest.raises(ValueError, match="C must be > 0"):
        check_training_conditions(_config(), C=0.0)
    with pytest.raises(ValueError, match="delta"):
        check_training_conditions(_config(), delta=1.0)
