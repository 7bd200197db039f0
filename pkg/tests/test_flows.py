import math

import numpy as np
import pytest

from tvsim.diagnostics.flows import (
    FLOW_KINDS,
    flow_bound,
    flow_envelope,
    sample_admissible,
    verify_flow,
    verify_flow_batch,
)
from tvsim.errors import FlowConstraintError
from tvsim.types import FlowSpec


@pytest.mark.parametrize("kind", FLOW_KINDS)
def test_random_admissible_tuples_stay_inside_their_envelope(kind):
    rng = np.random.default_rng(2024)
    params = sample_admissible(kind, 500, rng)
    check = verify_flow_batch(kind, params, 300)
    assert check.tuples == 500
    assert check.passed, check.to_dict()


def test_linear_flow_is_exact():
    spec = FlowSpec(kind="linear", params={"a0": 1.5, "b": -0.25}, horizon=10, t0=2)
    assert flow_bound(spec, 6) == pytest.approx(1.5 - 0.25 * 4)
    assert verify_flow(spec).passed


def test_sqrt_envelope_brackets_the_iteration():
    spec = FlowSpec(kind="sqrt", params={"d": 2.0, "c0": 1.0}, horizon=50)
    x = 1.0
    for t in range(50):
        x += 2.0 / x
    lo, hi = flow_envelope(spec, 50)
    assert lo <= x <= hi
    assert flow_bound(spec, 50) == pytest.approx(math.sqrt(2 * 2.0 * 50 + 1.0))


def test_power_bound_is_an_upper_bound():
    spec = FlowSpec(kind="power", params={"a": 2.0, "c": 1.0, "d": 3.0, "b0": 1.0}, horizon=100)
    b = 1.0
    for t in range(100):
        b += 2.0 * b / (t + 3.0)
    assert b <= flow_bound(spec, 100) * (1 + 1e-9)


def test_lin_decay_lower_bound_uses_end_time():
    spec = FlowSpec(kind="lin_decay", params={"b": 0.01, "e0": 2.0, "t3": 20}, horizon=20)
    assert flow_bound(spec, 5) == pytest.approx(2.0 - 0.01 * 2.0 * 20)


@pytest.mark.parametrize(
    "kind, params, message",
    [
        ("power", {"a": 1.0, "c": 1.0, "d": 1.0, "b0": 1.0}, "a > c"),
        ("sqrt", {"d": 1.0, "c0": 0.0}, "c0 > 0"),
        ("lin_decay", {"b": 1.5, "e0": 1.0}, "0 < b <= 1"),
        ("exp_inv", {"a": 3.0, "b": 1.0, "c": 1.0, "g0": 1.0}, "a < 2c"),
        ("linear", {"a0": 1.0}, "missing parameters"),
    ],
)
def test_inadmissible_parameters_are_rejected(kind, params, message):
    with pytest.raises(FlowConstraintError, match=message):
        verify_flow_batch(kind, params, 5)


def test_negative_start_and_unknown_kind():
    with pytest.raises(FlowConstraintError, match="t0 >= 0"):
        verify_flow_batch("linear", {"a0": 0.0, "b": 1.0}, 3, t0=-1)
    with pytest.raises(ValueError, match="Unknown flow kind"):
        verify_flow_batch("cubic", {}, 3)
