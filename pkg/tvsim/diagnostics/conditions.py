"""
Checker for the sufficient conditions on dimensions, scales and step sizes.

Every inequality is evaluated for a user-supplied constant C and failure
probability delta and reported with its numeric slack (positive = holds).
An inequality whose logarithm or denominator leaves its domain is reported
as undefined and counts as failed at every C.
"""
# tvsim/diagnostics/conditions.py
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Protocol


class _ConditionInputs(Protocol):
    d: int
    N: int
    M: int
    K: int
    K_prime: int
    sigma0: float
    sigma1: float
    sigma_p: float
    q_V: float
    eta: float


@dataclass(frozen=True)
class Inequality:
    name: str
    lhs: float
    relation: str  # "<=" or ">="
    rhs: float
    defined: bool = True

    @property
    def slack(self) -> float:
        if not self.defined:
            return float("nan")
        return self.rhs - self.lhs if self.relation == "<=" else self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return self.defined and self.slack >= 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "relation": self.relation,
            "rhs": self.rhs if self.defined else None,
            "slack": self.slack if self.defined else None,
            "defined": self.defined,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class ConditionItem:
    item: int
    title: str
    checks: tuple[Inequality, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict[str, Any]:
        return {
            "item": self.item,
            "title": self.title,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


@dataclass(frozen=True)
class ConditionReport:
    C: float
    delta: float
    items: tuple[ConditionItem, ...]

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.items)

    def item(self, number: int) -> ConditionItem:
        for it in self.items:
            if it.item == number:
                return it
        raise KeyError(number)

    def to_dict(self) -> dict[str, Any]:
        return {
            "C": self.C,
            "delta": self.delta,
            "passed": self.passed,
            "items": [i.to_dict() for i in self.items],
        }

    def csv_rows(self) -> list[dict[str, Any]]:
        rows = []
        for it in self.items:
            for c in it.checks:
                rows.append({"item": it.item, **c.to_dict()})
        return rows


def _log(x: float) -> float | None:
    return math.log(x) if x > 0 and math.isfinite(x) else None


def _upper(name: str, lhs: float, rhs: float | None) -> Inequality:
    if rhs is None or not math.isfinite(rhs):
        return Inequality(name, lhs, "<=", float("nan"), defined=False)
    return Inequality(name, lhs, "<=", rhs)


def _lower(name: str, lhs: float, rhs: float | None) -> Inequality:
    if rhs is None or not math.isfinite(rhs):
        return Inequality(name, lhs, ">=", float("nan"), defined=False)
    return Inequality(name, lhs, ">=", rhs)


def _div(num: float | None, den: float | None) -> float | None:
    if num is None or den is None or den <= 0:
        return None
    return num / den


def check_training_conditions(cfg: _ConditionInputs, C: float = 1.0, delta: float = 0.01) -> ConditionReport:
    if not C > 0:
        raise ValueError(f"C must be > 0, got {C!r}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta!r}")

    d, N, M, K, Kp = cfg.d, cfg.N, cfg.M, cfg.K, cfg.K_prime
    s0, s1, sp, qv, eta = cfg.sigma0, cfg.sigma1, cfg.sigma_p, cfg.q_V, cfg.eta
    log_inv_delta = math.log(1.0 / delta)
    log_kp = _log(Kp**2 / delta)  # log(K'^2 / delta)
    log_m = _log(M)

    # 1. ambient dimension
    log_1 = _log((Kp**2) * (N**2) * (M**2) / delta)
    item1 = (_lower("d >= C M^2 log(K'^2 N^2 M^2 / delta)", d, None if log_1 is None else C * M**2 * log_1),)

    # 2. sample size
    item2 = (
        _lower("N >= C K log(1/delta)", N, C * K * log_inv_delta),
        _lower("N >= C K K' log(1/delta) / M", N, C * K * Kp * log_inv_delta / M),
    )

    # 3. concept counts
    item3 = (
        _lower("K >= C log(1/delta)", K, C * log_inv_delta),
        _lower("K' >= C M", Kp, C * M),
        _lower("K' >= C K", Kp, C * K),
    )

    # 4. initialization scales
    s1_cap_b = None if log_kp is None else math.sqrt(qv * log_kp) / C
    s0_cap_a = None
    if log_kp is not None and log_m is not None:
        s0_cap_a = d ** (-0.25) / C * log_kp ** (-0.25) * math.sqrt(log_m)
    item4 = (
        _upper("sigma1 <= d^-1/2 / C", s1, d ** (-0.5) / C),
        _upper("sigma1 <= sqrt(q_V log(K'^2/delta)) / C", s1, s1_cap_b),
        _upper("sigma0 <= d^-1/4 log(K'^2/delta)^-1/4 sqrt(log M) / C", s0, s0_cap_a),
        _upper("sigma0 <= d^-1/2 / C", s0, d ** (-0.5) / C),
    )

    # 5. data noise
    item5 = (_upper("sigma_p <= d^-1/2 / C", sp, d ** (-0.5) / C),)

    # 6. value-step scale and learning rate
    inner = _log((M - 1) / 0.06) if M > 1 else None
    q_lo_den = None
    if inner is not None and s0 > 0:
        q_lo_den = _log(inner / (s0**2 * d))
    q_hi_den = None if log_kp is None else _log(d ** (-0.5) * math.sqrt(log_kp))
    eta_cap_a = None if log_kp is None else s1**2 * math.sqrt(d) * K * math.sqrt(log_kp) / (qv * C)
    eta_cap_b = _div(s1 * math.sqrt(d) * M**4, C * (M - 1) ** 2)
    item6 = (
        _lower("q_V >= C sigma1^2 d / log(sigma0^-2 d^-1 log((M-1)/0.06))", qv, _div(C * s1**2 * d, q_lo_den)),
        _upper("q_V <= sigma1^2 d / (C log(d^-1/2 sqrt(log(K'^2/delta))))", qv, _div(s1**2 * d, None if q_hi_den is None else C * q_hi_den)),
        _upper("eta <= sigma1^2 d^1/2 K sqrt(log(K'^2/delta)) / (q_V C)", eta, eta_cap_a),
        _upper("eta <= sigma1 d^1/2 M^4 / (C (M-1)^2)", eta, eta_cap_b),
    )

    items = (
        ConditionItem(1, "ambient dimension", item1),
        ConditionItem(2, "training set size", item2),
        ConditionItem(3, "concept counts", item3),
        ConditionItem(4, "initialization scales", item4),
        ConditionItem(5, "data noise", item5),
        ConditionItem(6, "value scale window and step size", item6),
    )
    return ConditionReport(C=float(C), delta=float(delta), items=items)
