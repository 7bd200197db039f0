"""Test losses and task-vector cosine diagnostics."""
# tvsim/diagnostics/losses.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from tvsim.errors import DegenerateNormError
from tvsim.model import (
    attention_entropy,
    cross_entropy,
    forward,
    hidden_state,
    predict,
    prediction_confidence,
)
from tvsim.parallel import ordered_map
from tvsim.types import ConceptBasis, Dictionary, ModelParams, Sample


@dataclass(frozen=True)
class EvalSummary:
    zero_one: float
    mean_ce: float
    confidence: float
    attn_max: float
    attn_entropy: float
    n: int

    def to_dict(self) -> dict[str, float | int]:
        return {
            "zero_one": self.zero_one,
            "mean_ce": self.mean_ce,
            "confidence": self.confidence,
            "attn_max": self.attn_max,
            "attn_entropy": self.attn_entropy,
            "n": self.n,
        }


@dataclass(frozen=True, eq=False)
class CosineReport:
    """cos(h0, v) for every basis vector, grouped by family."""

    cos_a: np.ndarray
    cos_b: np.ndarray
    cos_nu: np.ndarray

    def all(self) -> np.ndarray:
        return np.concatenate([self.cos_a, self.cos_b, self.cos_nu])

    def max_other(self, k_star: int) -> float:
        """Largest |cos| over every basis vector except a_{k_star}."""
        others = np.concatenate([np.delete(self.cos_a, k_star), self.cos_b, self.cos_nu])
        return float(np.max(np.abs(others))) if others.size else 0.0

    def to_dict(self) -> dict[str, list[float]]:
        return {"cos_a": self.cos_a.tolist(), "cos_b": self.cos_b.tolist(), "cos_nu": self.cos_nu.tolist()}


def _require_samples(samples: Sequence[Sample]) -> None:
    if len(samples) == 0:
        raise ValueError("need a non-empty sample set")


def _evaluate_one(params: ModelParams, sample: Sample, dictionary: Dictionary) -> tuple[int, float, float, float, float]:
    trace = forward(params, sample, dictionary)
    wrong = int(predict(trace) != sample.target_index)
    return (
        wrong,
        cross_entropy(trace, sample.target_index),
        prediction_confidence(trace),
        float(np.max(trace.pi)),
        attention_entropy(trace.pi),
    )


def evaluate_samples(
    params: ModelParams,
    samples: Sequence[Sample],
    dictionary: Dictionary,
    *,
    threads: int = 1,
) -> EvalSummary:
    _require_samples(samples)

    def one(i: int, sample: Sample) -> tuple[int, float, float, float, float]:
        try:
            return _evaluate_one(params, sample, dictionary)
        except DegenerateNormError as exc:
            raise exc.with_context(sample_index=i) from exc

    results = np.array(ordered_map(one, samples, threads), dtype=np.float64)
    return EvalSummary(
        zero_one=float(np.mean(results[:, 0])),
        mean_ce=float(np.mean(results[:, 1])),
        confidence=float(np.mean(results[:, 2])),
        attn_max=float(np.mean(results[:, 3])),
        attn_entropy=float(np.mean(results[:, 4])),
        n=len(samples),
    )


def zero_one_loss(
    params: ModelParams,
    samples: Sequence[Sample],
    dictionary: Dictionary,
    *,
    threads: int = 1,
) -> float:
    """Fraction of samples whose argmax token differs from the target."""
    return evaluate_samples(params, samples, dictionary, threads=threads).zero_one


def cosines_of(h0: np.ndarray, basis: ConceptBasis) -> CosineReport:
    n = float(np.linalg.norm(h0))
    if not n >= 1e-30:
        raise DegenerateNormError(f"||h0|| = {n:.3e}; cosines undefined")
    unit = h0 / n
    # basis rows are unit vectors, so dot products are already cosines
    return CosineReport(cos_a=basis.a @ unit, cos_b=basis.b @ unit, cos_nu=basis.nu @ unit)


def h0_cosines(params: ModelParams, sample: Sample, basis: ConceptBasis) -> CosineReport:
    _, _, h0 = hidden_state(params, sample)
    return cosines_of(h0, basis)


def cosine_summary(
    params: ModelParams,
    samples: Sequence[Sample],
    basis: ConceptBasis,
    *,
    threads: int = 1,
) -> dict[str, float]:
    """
    Means over samples of: cos with the co-task a, max |cos| with any b, and
    max |cos| with any basis vector other than the co-task a.
    """
    _require_samples(samples)

    def one(_: int, sample: Sample) -> tuple[float, float, float]:
        rep = h0_cosines(params, sample, basis)
        return (
            float(rep.cos_a[sample.co_task]),
            float(np.max(np.abs(rep.cos_b))),
            rep.max_other(sample.co_task),
        )

    vals = np.array(ordered_map(one, samples, threads), dtype=np.float64)
    return {
        "cos_a_star": float(np.mean(vals[:, 0])),
        "cos_b_max": float(np.mean(vals[:, 1])),
        "cos_other_max": float(np.mean(vals[:, 2])),
    }
