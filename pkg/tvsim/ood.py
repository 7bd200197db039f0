"""
Out-of-distribution experiments on a trained model.

- dictionary shift: rebuild the concept families (conic combinations of the
  learned task directions, fresh or recombined low-level directions, fresh
  common tokens) and measure the 0-1 loss against the rebuilt dictionary.
- multi-concept prompts: demonstrations drawn from several co-tasks; the
  normalized attention output is split into non-negative weights over the
  task directions plus a residual outside their span.
- demo-only regression: the attention output of a prompt with its query
  removed, compared against the co-task direction.
- arithmetic transfer: the attention output of one prompt added to an
  unrelated query word with the same co-task.

`run_ood_suite` runs the experiments named in an `OODConfig` and returns a
JSON-ready dict keyed by experiment name.
"""
# tvsim/ood.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from tvsim.concept_space import DEFAULT_X_A, build_dictionary, label_token_index, nearest_token
from tvsim.datagen import make_word, sample_dataset, sample_multi_concept_prompt, strip_query
from tvsim.diagnostics.losses import CosineReport, cosines_of, zero_one_loss
from tvsim.errors import DegenerateNormError, DimensionError, InfeasibleShiftError
from tvsim.model import MIN_H0_NORM, hidden_state
from tvsim.parallel import ordered_map
from tvsim.schema import ExperimentConfig, OODConfig
from tvsim.types import ICL, NORM_TOL, QA_ICL, ConceptBasis, Dictionary, ModelParams, Sample

logger = logging.getLogger(__name__)

OOD_EXPERIMENTS = ("dictionary_shift", "multi_concept", "demo_only", "arithmetic_transfer")
# per-task hybrid weight range expected for a two-task prompt with equal demo shares
BALANCED_WEIGHT_BAND = (0.2, 0.8)


@dataclass(frozen=True)
class ShiftedDictionarySpec:
    """
    a_weights: one row of K non-negative weights per new task direction.
    b_weights: signed combinations of the original b_k (rows mutually orthogonal).
    n_fresh_b / n_fresh_nu: directions taken from the unused complement.
    """

    a_weights: tuple[tuple[float, ...], ...]
    b_weights: tuple[tuple[float, ...], ...] = ()
    n_fresh_b: int = 0
    keep_original_nu: bool = False
    n_fresh_nu: int = 0

    @property
    def K_a(self) -> int:
        return len(self.a_weights)

    @property
    def K_b(self) -> int:
        return len(self.b_weights) + self.n_fresh_b


@dataclass(frozen=True, eq=False)
class HybridDecomposition:
    task_set: tuple[int, ...]
    weights: np.ndarray
    projections: np.ndarray
    residual_norm: float
    degenerate: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_set": list(self.task_set),
            "weights": self.weights.tolist(),
            "projections": self.projections.tolist(),
            "residual_norm": self.residual_norm,
            "degenerate": self.degenerate,
        }


def shifted_spec_from_config(ood: OODConfig, K: int, K_prime: int) -> ShiftedDictionarySpec:
    """Fills unset OOD fields: identity a-weights, fresh b's for every unpaired a, K' fresh common tokens."""
    a_weights = ood.a_weights if ood.a_weights is not None else tuple(tuple(float(i == j) for j in range(K)) for i in range(K))
    n_fresh_b = ood.n_fresh_b if ood.n_fresh_b is not None else max(0, len(a_weights) - len(ood.b_weights))
    if ood.n_fresh_nu is not None:
        n_fresh_nu = ood.n_fresh_nu
    else:
        n_fresh_nu = 0 if ood.keep_original_nu else K_prime
    return ShiftedDictionarySpec(
        a_weights=tuple(tuple(float(w) for w in row) for row in a_weights),
        b_weights=tuple(tuple(float(w) for w in row) for row in ood.b_weights),
        n_fresh_b=int(n_fresh_b),
        keep_original_nu=ood.keep_original_nu,
        n_fresh_nu=int(n_fresh_nu),
    )


def _check_spec(basis: ConceptBasis, spec: ShiftedDictionarySpec) -> tuple[np.ndarray, np.ndarray]:
    K = basis.K
    A = np.asarray(spec.a_weights, dtype=np.float64).reshape(-1, K) if spec.a_weights else np.zeros((0, K))
    B = np.asarray(spec.b_weights, dtype=np.float64).reshape(-1, K) if spec.b_weights else np.zeros((0, K))
    if not 1 <= A.shape[0] <= K:
        raise InfeasibleShiftError(f"need 1 to K={K} new task directions, got {A.shape[0]}")
    if np.any(A < 0) or np.any(~np.isfinite(A)):
        raise InfeasibleShiftError("a_weights must be finite and non-negative")
    if np.any(A.sum(axis=1) <= 0):
        raise InfeasibleShiftError("every a_weights row needs at least one positive entry")
    if spec.n_fresh_b < 0 or spec.n_fresh_nu < 0:
        raise InfeasibleShiftError("fresh direction counts must be >= 0")
    if spec.K_b != A.shape[0]:
        raise InfeasibleShiftError(
            f"low-level directions ({spec.K_b}) must pair one-to-one with task directions ({A.shape[0]})"
        )
    if B.shape[0]:
        norms = np.linalg.norm(B, axis=1)
        if np.any(norms == 0) or np.any(~np.isfinite(B)):
            raise InfeasibleShiftError("b_weights rows must be finite and non-zero")
        unit = B / norms[:, None]
        off = unit @ unit.T - np.eye(B.shape[0])
        if np.max(np.abs(off)) > NORM_TOL:
            raise InfeasibleShiftError("b_weights rows must be mutually orthogonal")
    return A, B


def _complement(basis: ConceptBasis, count: int, rng: np.random.Generator) -> np.ndarray:
    """`count` orthonormal directions orthogonal to every basis vector."""
    if count == 0:
        return np.zeros((0, basis.d))
    used = basis.stacked()
    if np.all(np.count_nonzero(used, axis=1) == 1):
        free = np.setdiff1d(np.arange(basis.d), np.nonzero(used)[1])
        if count > free.size:
            raise InfeasibleShiftError(f"need {count} fresh directions, only {free.size} unused coordinates in d={basis.d}")
        out = np.zeros((count, basis.d))
        out[np.arange(count), rng.permutation(free)[:count]] = 1.0
        return out
    # general basis: right singular vectors past the rank span the complement
    _, _, vt = np.linalg.svd(used, full_matrices=True)
    rest = vt[used.shape[0] :]
    if count > rest.shape[0]:
        raise InfeasibleShiftError(f"need {count} fresh directions, complement has dimension {rest.shape[0]}")
    return rest[rng.permutation(rest.shape[0])[:count]]


def build_shifted_dictionary(
    basis: ConceptBasis,
    spec: ShiftedDictionarySpec,
    seed: int,
    *,
    x_a: float = DEFAULT_X_A,
) -> tuple[ConceptBasis, Dictionary]:
    A, B = _check_spec(basis, spec)
    a_star = A @ basis.a
    a_star /= np.linalg.norm(a_star, axis=1, keepdims=True)

    rng = np.random.default_rng(seed)
    fresh = _complement(basis, spec.n_fresh_b + spec.n_fresh_nu, rng)
    parts_b = []
    if B.shape[0]:
        recombined = B @ basis.b
        parts_b.append(recombined / np.linalg.norm(recombined, axis=1, keepdims=True))
    parts_b.append(fresh[: spec.n_fresh_b])
    b_star = np.vstack(parts_b)

    parts_nu = [basis.nu] if spec.keep_original_nu else []
    parts_nu.append(fresh[spec.n_fresh_b :])
    nu_star = np.vstack(parts_nu)

    lows = np.vstack([b_star, nu_star])
    if lows.shape[0]:
        gram = lows @ lows.T
        cross = lows @ a_star.T
        worst = max(float(np.max(np.abs(gram - np.eye(lows.shape[0])))), float(np.max(np.abs(cross))) if cross.size else 0.0)
        if worst > NORM_TOL:
            raise InfeasibleShiftError(f"shifted low-level directions are not orthonormal to the task directions: {worst:.3e}")

    shifted = ConceptBasis(d=basis.d, a=a_star, b=b_star, nu=nu_star)
    logger.debug("shifted basis: K_a=%d K_b=%d K_nu=%d", shifted.K, b_star.shape[0], nu_star.shape[0])
    return shifted, build_dictionary(shifted, x_a=x_a)


def evaluate_dictionary_shift(
    params: ModelParams,
    shifted: tuple[ConceptBasis, Dictionary],
    n_test: int,
    sigma_p_star: float,
    rng: np.random.Generator,
    *,
    kind: str = ICL,
    J: int,
    M: int = 1,
    x_a: float = DEFAULT_X_A,
    threads: int = 1,
) -> float:
    """0-1 loss of prompts drawn from the shifted families, scored against the shifted dictionary."""
    if kind not in (ICL, QA_ICL):
        raise ValueError(f"dictionary shift prompts must be 'icl' or 'qa_icl', got {kind!r}")
    basis, dictionary = shifted
    if basis.d != params.d:
        raise DimensionError(f"shifted basis has d={basis.d}, params have d={params.d}")
    samples = sample_dataset(kind, basis, n_test, J=J, M=M, sigma_p=sigma_p_star, x_a=x_a, rng=rng)
    return zero_one_loss(params, samples, dictionary, threads=threads)


def decompose_hybrid(h0: np.ndarray, basis: ConceptBasis, task_set: Sequence[int]) -> HybridDecomposition:
    """
    Splits LN(h0) into weights over {a_k : k in task_set} and a residual.

    Projections onto each a_k are clipped at 0 and rescaled to sum to 1; when
    every projection is <= 0 the weights are uniform and `degenerate` is set.
    The residual is the norm of the part of LN(h0) outside span{a_k}.
    """
    tasks = tuple(int(k) for k in task_set)
    if not tasks:
        raise ValueError("task_set must be non-empty")
    n = float(np.linalg.norm(h0))
    if not n >= MIN_H0_NORM:
        raise DegenerateNormError(f"||h0|| = {n:.3e}; hybrid decomposition undefined")
    unit = h0 / n
    A = basis.a[list(tasks)]
    proj = A @ unit
    residual = float(np.linalg.norm(unit - A.T @ proj))
    clipped = np.clip(proj, 0.0, None)
    total = float(np.sum(clipped))
    if total > 0:
        return HybridDecomposition(tasks, clipped / total, proj, residual)
    return HybridDecomposition(tasks, np.full(len(tasks), 1.0 / len(tasks)), proj, residual, degenerate=True)


def hybrid_vector_decomposition(params: ModelParams, prompt: Sample, basis: ConceptBasis) -> HybridDecomposition:
    tasks = prompt.task_set or (prompt.co_task,)
    _, _, h0 = hidden_state(params, prompt)
    return decompose_hybrid(h0, basis, tasks)


def demo_only_task_vector(params: ModelParams, demos: Sample, basis: ConceptBasis) -> CosineReport:
    """Cosines of h0 for a demonstrations-only sequence whose last column is a demo label."""
    if demos.length < 2:
        raise ValueError("demonstrations-only sequence is empty (need at least one word-label pair)")
    _, _, h0 = hidden_state(params, demos)
    return cosines_of(h0, basis)


def demo_only_cosines(
    params: ModelParams,
    samples: Sequence[Sample],
    basis: ConceptBasis,
    *,
    threads: int = 1,
) -> dict[str, float | int]:
    if len(samples) == 0:
        raise ValueError("need a non-empty sample set")

    def one(_: int, s: Sample) -> tuple[float, float]:
        rep = demo_only_task_vector(params, s, basis)
        return float(rep.cos_a[s.co_task]), rep.max_other(s.co_task)

    vals = np.array(ordered_map(one, samples, threads), dtype=np.float64)
    return {
        "cos_a_star_mean": float(np.mean(vals[:, 0])),
        "cos_a_star_min": float(np.min(vals[:, 0])),
        "cos_other_max_mean": float(np.mean(vals[:, 1])),
        "n": len(samples),
    }


def arithmetic_transfer(
    params: ModelParams,
    source_prompt: Sample,
    external_query: np.ndarray,
    dictionary: Dictionary,
) -> int:
    """argmax_k u_k^T (LN(h0(source_prompt)) + external_query)."""
    q = np.asarray(external_query, dtype=np.float64)
    if q.shape != (params.d,):
        raise DimensionError(f"external query must have shape ({params.d},), got {q.shape}")
    _, _, h0 = hidden_state(params, source_prompt)
    n = float(np.linalg.norm(h0))
    if not n >= MIN_H0_NORM:
        raise DegenerateNormError(f"||h0|| = {n:.3e}; layer norm undefined")
    return nearest_token(dictionary, h0 / n + q)


def transfer_accuracy(
    params: ModelParams,
    basis: ConceptBasis,
    dictionary: Dictionary,
    n: int,
    J: int,
    sigma_p_star: float,
    x_a: float,
    rng: np.random.Generator,
    *,
    kind: str = ICL,
    M: int = 1,
    threads: int = 1,
) -> float:
    """
    Fraction of n transfers that hit the label token: each source prompt's
    task vector is added to a fresh query word x_a a_k + y b_k + noise with
    the same co-task k and an independent sign y.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    sources = sample_dataset(kind, basis, n, J=J, M=M, sigma_p=sigma_p_star, x_a=x_a, rng=rng)
    queries = []
    for s in sources:
        y = 1 if rng.random() < 0.5 else -1
        word = make_word(basis, ((s.co_task, y),), x_a, sigma_p_star, rng)
        queries.append((word, label_token_index(s.co_task, y, basis.K)))

    def one(i: int, s: Sample) -> int:
        word, target = queries[i]
        return int(arithmetic_transfer(params, s, word, dictionary) == target)

    return float(np.mean(ordered_map(one, sources, threads)))


def balanced_fraction(weights: np.ndarray, band: tuple[float, float] = BALANCED_WEIGHT_BAND) -> float:
    """Share of prompts whose hybrid weights all fall inside `band`."""
    lo, hi = band
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    return float(np.mean(np.all((w >= lo) & (w <= hi), axis=1)))


def _multi_concept(params: ModelParams, basis: ConceptBasis, config: ExperimentConfig, rng: np.random.Generator, threads: int) -> dict[str, Any]:
    ood = config.ood
    tasks = ood.task_set if ood.task_set is not None else tuple(range(min(2, config.K)))
    prompts = [
        sample_multi_concept_prompt(basis, tasks, ood.J_star, config.sigma_p_star, config.x_a, rng)
        for _ in range(ood.n_multi)
    ]
    parts = ordered_map(lambda _, p: hybrid_vector_decomposition(params, p, basis), prompts, threads)
    weights = np.array([p.weights for p in parts])
    residuals = np.array([p.residual_norm for p in parts])
    return {
        "task_set": list(tasks),
        "J_star": ood.J_star,
        "n": len(parts),
        "mean_weights": weights.mean(axis=0).tolist(),
        "min_weight": float(weights.min()),
        "max_weight_sum_error": float(np.max(np.abs(weights.sum(axis=1) - 1.0))),
        "mean_residual": float(residuals.mean()),
        "residual_max": ood.residual_max,
        "frac_residual_ok": float(np.mean(residuals <= ood.residual_max)),
        "frac_weights_balanced": balanced_fraction(weights),
        "degenerate": int(sum(p.degenerate for p in parts)),
    }


def run_ood_suite(
    params: ModelParams,
    basis: ConceptBasis,
    dictionary: Dictionary,
    config: ExperimentConfig,
    rng: np.random.Generator,
    *,
    threads: int = 1,
) -> dict[str, Any]:
    ood = config.ood
    results: dict[str, Any] = {}
    for name in ood.experiments:
        logger.info("ood experiment: %s", name)
        if name == "dictionary_shift":
            spec = shifted_spec_from_config(ood, config.K, config.K_prime)
            shifted = build_shifted_dictionary(basis, spec, config.seed + ood.seed_offset, x_a=config.x_a)
            loss = evaluate_dictionary_shift(
                params,
                shifted,
                ood.n_test,
                config.sigma_p_star,
                rng,
                kind=ood.shift_kind,
                J=config.J_star,
                M=config.M,
                x_a=config.x_a,
                threads=threads,
            )
            results[name] = {
                "zero_one": loss,
                "kind": ood.shift_kind,
                "K_a": spec.K_a,
                "K_b": spec.K_b,
                "K_nu": shifted[0].K_prime,
                "n": ood.n_test,
            }
        elif name == "multi_concept":
            results[name] = _multi_concept(params, basis, config, rng, threads)
        elif name == "demo_only":
            prompts = sample_dataset(
                ood.demo_kind,
                basis,
                ood.n_demo_only,
                J=config.J_star,
                M=config.M,
                sigma_p=config.sigma_p_star,
                x_a=config.x_a,
                rng=rng,
            )
            demos = [strip_query(p) for p in prompts]
            results[name] = {"kind": ood.demo_kind, **demo_only_cosines(params, demos, basis, threads=threads)}
        elif name == "arithmetic_transfer":
            acc = transfer_accuracy(
                params,
                basis,
                dictionary,
                ood.n_transfer,
                config.J_star,
                config.sigma_p_star,
                config.x_a,
                rng,
                kind=ood.demo_kind,
                M=config.M,
                threads=threads,
            )
            results[name] = {"accuracy": acc, "kind": ood.demo_kind, "n": ood.n_transfer}
        else:
            raise ValueError(f"Unknown OOD experiment: {name}")
    return results
