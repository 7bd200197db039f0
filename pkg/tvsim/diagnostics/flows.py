"""
Discrete recurrences and the closed-form curves that bound them.

    kind       recurrence                          closed form (start t0)
    linear     a_{t+1} = a_t + b                    a_t = a0 + b (t - t0)
    power      b_{t+1} = b_t + a b_t / (c t + d)    b_t <= b0 ((t + d/c) / (t0 + d/c))^(a/c)
    sqrt       c_{t+1} = c_t + d / c_t              x_t <= c_t <= d / c0 + x_t,
                                                    x_t = sqrt(2 d (t - t0) + c0^2)
    lin_decay  e_{t+1} = e_t - b e_t                e_t >= e0 - b e0 (t3 - t0) for t <= t3
    quad_exp   f_{t+1} = f_t + a (t - t0) f_t       f0 + a f0 ((t - 1 - t0)^2 - 1) / 2 <= f_t <= f0 exp(a t^2 / 2)
    exp_inv    g_{t+1} = g_t + a g_t / (b t + c)^2  g_t >= g0 exp(-a / (b (b t + c)) + a / (b (b t0 + c)))

Admissibility:
    power      a > c > 0, d > 0, b0 > 0
    sqrt       d > 0, c0 > 0
    lin_decay  0 < b <= 1, e0 > 0
    quad_exp   a > 0, f0 > 0
    exp_inv    a, b, c > 0, a < 2c, a <= b (b t0 + c), g0 > 0
    all        t0 >= 0

Recurrences are iterated with equality (the extreme member of each family).
Multiplicative flows are iterated and compared in log space. Every comparison
allows a relative slack of 1e-9 for rounding.
"""
# tvsim/diagnostics/flows.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from tvsim.errors import FlowConstraintError
from tvsim.types import FlowSpec

logger = logging.getLogger(__name__)

FLOW_KINDS = ("linear", "power", "sqrt", "lin_decay", "quad_exp", "exp_inv")
REL_TOL = 1e-9

_REQUIRED: dict[str, tuple[str, ...]] = {
    "linear": ("a0", "b"),
    "power": ("a", "c", "d", "b0"),
    "sqrt": ("d", "c0"),
    "lin_decay": ("b", "e0"),
    "quad_exp": ("a", "f0"),
    "exp_inv": ("a", "b", "c", "g0"),
}


@dataclass(frozen=True)
class FlowCheck:
    kind: str
    tuples: int
    violations: int
    first_violation_step: int | None

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict[str, object]:
        return {
            "kind": self.kind,
            "tuples": self.tuples,
            "violations": self.violations,
            "first_violation_step": self.first_violation_step,
            "passed": self.passed,
        }


def _as_arrays(kind: str, params: Mapping[str, object], t0: object) -> dict[str, np.ndarray]:
    if kind not in FLOW_KINDS:
        raise ValueError(f"Unknown flow kind: {kind}")
    missing = [name for name in _REQUIRED[kind] if name not in params]
    if missing:
        raise FlowConstraintError(f"{kind} flow is missing parameters {missing}")
    out = {name: np.atleast_1d(np.asarray(params[name], dtype=np.float64)) for name in _REQUIRED[kind]}
    out["t0"] = np.atleast_1d(np.asarray(t0, dtype=np.float64))
    if "t3" in params:
        out["t3"] = np.atleast_1d(np.asarray(params["t3"], dtype=np.float64))
    return out


def _require(ok: np.ndarray, kind: str, condition: str) -> None:
    if not np.all(ok):
        raise FlowConstraintError(f"{kind} flow requires {condition}")


def check_admissible(kind: str, p: Mapping[str, np.ndarray]) -> None:
    _require(p["t0"] >= 0, kind, "t0 >= 0")
    for name, arr in p.items():
        _require(np.isfinite(arr), kind, f"finite {name}")
    if kind == "power":
        _require(p["c"] > 0, kind, "c > 0")
        _require(p["a"] > p["c"], kind, "a > c")
        _require(p["d"] > 0, kind, "d > 0")
        _require(p["b0"] > 0, kind, "b0 > 0")
    elif kind == "sqrt":
        _require(p["d"] > 0, kind, "d > 0")
        _require(p["c0"] > 0, kind, "c0 > 0")
    elif kind == "lin_decay":
        _require((p["b"] > 0) & (p["b"] <= 1), kind, "0 < b <= 1")
        _require(p["e0"] > 0, kind, "e0 > 0")
    elif kind == "quad_exp":
        _require(p["a"] > 0, kind, "a > 0")
        _require(p["f0"] > 0, kind, "f0 > 0")
    elif kind == "exp_inv":
        _require((p["a"] > 0) & (p["b"] > 0) & (p["c"] > 0), kind, "a, b, c > 0")
        _require(p["a"] < 2 * p["c"], kind, "a < 2c")
        _require(p["a"] <= p["b"] * (p["b"] * p["t0"] + p["c"]), kind, "a <= b (b t0 + c)")
        _require(p["g0"] > 0, kind, "g0 > 0")


def _envelope(kind: str, p: Mapping[str, np.ndarray], t: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
    """(lower, upper) bounds at time t; log-space for power, quad_exp and exp_inv."""
    t0 = p["t0"]
    inf = np.full(np.broadcast(t0, t).shape, np.inf)
    if kind == "linear":
        v = p["a0"] + p["b"] * (t - t0)
        return v, v
    if kind == "power":
        ratio = p["a"] / p["c"]
        shift = p["d"] / p["c"]
        upper = np.log(p["b0"]) + ratio * (np.log(t + shift) - np.log(t0 + shift))
        return -inf, upper
    if kind == "sqrt":
        x = np.sqrt(2.0 * p["d"] * (t - t0) + p["c0"] ** 2)
        return x, p["d"] / p["c0"] + x
    if kind == "lin_decay":
        t3 = p.get("t3", t0)
        return p["e0"] - p["b"] * p["e0"] * (t3 - t0), inf
    if kind == "quad_exp":
        s = t - t0
        lower = np.log(p["f0"]) + np.log1p(p["a"] * ((s - 1.0) ** 2 - 1.0) / 2.0)
        upper = np.log(p["f0"]) + p["a"] * np.asarray(t, dtype=np.float64) ** 2 / 2.0
        return lower, upper
    if kind == "exp_inv":
        a, b, c = p["a"], p["b"], p["c"]
        lower = np.log(p["g0"]) - a / (b * (b * t + c)) + a / (b * (b * t0 + c))
        return lower, inf
    raise ValueError(f"Unknown flow kind: {kind}")


_START = {"linear": "a0", "power": "b0", "sqrt": "c0", "lin_decay": "e0", "quad_exp": "f0", "exp_inv": "g0"}
_LOG_STATE = ("power", "quad_exp", "exp_inv")


def _initial_state(kind: str, p: Mapping[str, np.ndarray]) -> np.ndarray:
    start = p[_START[kind]]
    return np.log(start) if kind in _LOG_STATE else np.array(start, dtype=np.float64, copy=True)


def _step(kind: str, p: Mapping[str, np.ndarray], x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """One recurrence step from time t to t+1 (log state for multiplicative kinds)."""
    if kind == "linear":
        return x + p["b"]
    if kind == "power":
        return x + np.log1p(p["a"] / (p["c"] * t + p["d"]))
    if kind == "sqrt":
        return x + p["d"] / x
    if kind == "lin_decay":
        return x - p["b"] * x
    if kind == "quad_exp":
        return x + np.log1p(p["a"] * (t - p["t0"]))
    if kind == "exp_inv":
        return x + np.log1p(p["a"] / (p["b"] * t + p["c"]) ** 2)
    raise ValueError(f"Unknown flow kind: {kind}")


def _violations(kind: str, x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    if kind in ("power", "quad_exp", "exp_inv"):
        # log space: an absolute slack here is a relative slack on the value
        return (x < lower - REL_TOL) | (x > upper + REL_TOL)
    scale = np.maximum(1.0, np.abs(x))
    return (x < lower - REL_TOL * scale) | (x > upper + REL_TOL * scale)


def verify_flow_batch(
    kind: str,
    params: Mapping[str, object],
    horizon: int,
    *,
    t0: object = 0,
) -> FlowCheck:
    """
    Iterates many recurrences side by side and checks the envelope after every step.

    `params` maps parameter names to scalars or equal-length arrays.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    p = _as_arrays(kind, params, params.get("t0", t0) if isinstance(params, Mapping) else t0)
    check_admissible(kind, p)
    if kind == "lin_decay" and "t3" not in p:
        p["t3"] = p["t0"] + horizon

    x = _initial_state(kind, p)
    x = np.broadcast_to(x, np.broadcast(*p.values()).shape).copy()
    n = x.shape[0]
    bad = np.zeros(n, dtype=bool)
    first: int | None = None

    t = p["t0"].copy()
    for step in range(horizon + 1):
        lower, upper = _envelope(kind, p, t)
        hit = _violations(kind, x, lower, upper)
        if kind == "lin_decay":
            hit &= t <= p["t3"]
        if np.any(hit) and first is None:
            first = step
        bad |= hit
        if step == horizon:
            break
        x = _step(kind, p, x, t)
        t = t + 1.0

    check = FlowCheck(kind=kind, tuples=n, violations=int(np.sum(bad)), first_violation_step=first)
    if not check.passed:
        logger.warning("flow %s: %d of %d tuples violate the bound (first at step %s)", kind, check.violations, n, first)
    return check


def verify_flow(spec: FlowSpec) -> FlowCheck:
    return verify_flow_batch(spec.kind, dict(spec.params), spec.horizon, t0=spec.t0)


def flow_envelope(spec: FlowSpec, t: float) -> tuple[float, float]:
    """Lower and upper closed-form bounds at t (infinite where the kind has no such side)."""
    p = _as_arrays(spec.kind, spec.params, spec.t0)
    check_admissible(spec.kind, p)
    if spec.kind == "lin_decay" and "t3" not in p:
        p["t3"] = p["t0"] + spec.horizon
    lower, upper = _envelope(spec.kind, p, float(t))
    lo, hi = float(np.ravel(lower)[0]), float(np.ravel(upper)[0])
    if spec.kind in ("power", "quad_exp", "exp_inv"):
        lo, hi = float(np.exp(lo)), float(np.exp(hi))
    return lo, hi


def flow_bound(spec: FlowSpec, t: float) -> float:
    """
    The closed-form curve of each kind: the exact solution (linear), the upper
    bound (power, quad_exp), the lower bound (sqrt, lin_decay, exp_inv).
    """
    lo, hi = flow_envelope(spec, t)
    if spec.kind in ("power", "quad_exp"):
        return hi
    return lo


def sample_admissible(kind: str, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Random admissible parameter tuples (with start times) for property checks."""
    t0 = rng.integers(0, 101, size=n).astype(np.float64)
    u = lambda lo, hi: rng.uniform(lo, hi, size=n)  # noqa: E731
    if kind == "linear":
        return {"a0": u(-10, 10), "b": u(-1, 1), "t0": t0}
    if kind == "power":
        c = u(0.1, 2.0)
        return {"a": c * u(1.01, 4.0), "c": c, "d": u(0.1, 10.0), "b0": u(0.1, 10.0), "t0": t0}
    if kind == "sqrt":
        return {"d": u(0.01, 10.0), "c0": u(0.1, 10.0), "t0": t0}
    if kind == "lin_decay":
        return {"b": u(1e-4, 1.0), "e0": u(0.1, 10.0), "t0": t0}
    if kind == "quad_exp":
        return {"a": u(1e-7, 1e-4), "f0": u(0.1, 10.0), "t0": t0}
    if kind == "exp_inv":
        b, c = u(0.01, 2.0), u(0.1, 10.0)
        cap = np.minimum(2.0 * c, b * (b * t0 + c))
        return {"a": cap * u(0.01, 0.99), "b": b, "c": c, "g0": u(0.1, 10.0), "t0": t0}
    raise ValueError(f"Unknown flow kind: {kind}")
