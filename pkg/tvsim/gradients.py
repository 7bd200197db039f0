"""
Closed-form gradients of the per-sample cross-entropy, plus two numerical oracles
(central differences and the complex step).

With r = u_t - sum_k omega_k u_k, h0_hat = h0 / ||h0|| and
P r = r - (r^T h0_hat) h0_hat (projection off h0):

    g_V = -(P r) z^T / ||h0||                     z = S_keys pi
    c_j = -(P r)^T W_V T_j / ||h0||               (dloss / dpi_j)
    gamma_j = pi_j (c_j - sum_i pi_i c_i)         (dloss / dlogit_j)
    g_K = (W_Q q) (S_keys gamma)^T
    g_Q = (W_K S_keys gamma) q^T

Each per-sample gradient is a sum of rank-one outer products, so the batch
gradient is assembled as one d x N by N x d product per matrix.
"""
# tvsim/gradients.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from tvsim.errors import DegenerateNormError
from tvsim.model import MIN_H0_NORM, cross_entropy, forward
from tvsim.parallel import ordered_map
from tvsim.types import Dictionary, ForwardTrace, GradCoefficients, GradTriple, ModelParams, Sample

logger = logging.getLogger(__name__)

# step along the imaginary axis; any value far below sqrt(eps) works
COMPLEX_STEP = 1e-20


@dataclass(frozen=True, eq=False)
class _Factors:
    loss: float
    v_left: np.ndarray
    v_right: np.ndarray
    k_left: np.ndarray
    k_right: np.ndarray
    q_left: np.ndarray
    q_right: np.ndarray


def residual_direction(trace: ForwardTrace, dictionary: Dictionary, target_index: int) -> np.ndarray:
    """u_t - sum_k omega_k u_k."""
    return dictionary.tokens[target_index] - dictionary.tokens.T @ trace.omega


def residual_direction_expanded(trace: ForwardTrace, dictionary: Dictionary, target_index: int) -> np.ndarray:
    """(1 - omega_t) u_t - sum_{k != t} omega_k u_k."""
    others = np.array(trace.omega, copy=True)
    others[target_index] = 0.0
    return (1.0 - trace.omega[target_index]) * dictionary.tokens[target_index] - dictionary.tokens.T @ others


def _projected_residual(trace: ForwardTrace, dictionary: Dictionary, target_index: int) -> np.ndarray:
    h_hat = trace.h0 / trace.h0_norm
    r = residual_direction(trace, dictionary, target_index)
    return r - (r @ h_hat) * h_hat


def _factors(params: ModelParams, sample: Sample, dictionary: Dictionary) -> _Factors:
    trace = forward(params, sample, dictionary)
    n = trace.h0_norm
    p = _projected_residual(trace, dictionary, sample.target_index)

    keys = sample.keys
    c = -(keys.T @ (params.W_V.T @ p)) / n
    gamma = trace.pi * (c - trace.pi @ c)
    s_gamma = keys @ gamma
    q = sample.query
    return _Factors(
        loss=cross_entropy(trace, sample.target_index),
        v_left=-p / n,
        v_right=trace.z,
        k_left=params.W_Q @ q,
        k_right=s_gamma,
        q_left=params.W_K @ s_gamma,
        q_right=q,
    )


def _with_l2(grads: GradTriple, params: ModelParams, lam: float) -> GradTriple:
    if lam == 0:
        return grads
    return GradTriple(
        g_K=grads.g_K + lam * params.W_K,
        g_Q=grads.g_Q + lam * params.W_Q,
        g_V=grads.g_V + lam * params.W_V,
    )


def analytic_grads(
    params: ModelParams,
    sample: Sample,
    dictionary: Dictionary,
    *,
    lam: float = 0.0,
) -> GradTriple:
    f = _factors(params, sample, dictionary)
    grads = GradTriple(
        g_K=np.outer(f.k_left, f.k_right),
        g_Q=np.outer(f.q_left, f.q_right),
        g_V=np.outer(f.v_left, f.v_right),
    )
    return _with_l2(grads, params, lam)


def grad_coefficients(params: ModelParams, sample: Sample, dictionary: Dictionary) -> GradCoefficients:
    """iota_j = pi_j (P r)^T W_V T_j / ||h0|| for every key position j."""
    trace = forward(params, sample, dictionary)
    p = _projected_residual(trace, dictionary, sample.target_index)
    iota = trace.pi * (sample.keys.T @ (params.W_V.T @ p)) / trace.h0_norm
    return GradCoefficients(iota=iota, omega=trace.omega, pi=trace.pi)


def batch_grads_and_loss(
    params: ModelParams,
    samples: Sequence[Sample],
    dictionary: Dictionary,
    *,
    lam: float = 0.0,
    threads: int = 1,
) -> tuple[GradTriple, float]:
    """Mean gradient and mean cross-entropy over the batch (loss excludes the L2 term)."""
    if len(samples) == 0:
        raise ValueError("batch_grads needs a non-empty batch")

    def one(i: int, sample: Sample) -> _Factors:
        try:
            return _factors(params, sample, dictionary)
        except DegenerateNormError as exc:
            raise exc.with_context(sample_index=i) from exc

    factors = ordered_map(one, samples, threads)
    n = float(len(factors))

    def assemble(left: str, right: str) -> np.ndarray:
        A = np.column_stack([getattr(f, left) for f in factors])
        B = np.column_stack([getattr(f, right) for f in factors])
        return (A @ B.T) / n

    grads = GradTriple(
        g_K=assemble("k_left", "k_right"),
        g_Q=assemble("q_left", "q_right"),
        g_V=assemble("v_left", "v_right"),
    )
    loss = float(np.mean([f.loss for f in factors]))
    return _with_l2(grads, params, lam), loss


def batch_grads(
    params: ModelParams,
    samples: Sequence[Sample],
    dictionary: Dictionary,
    *,
    lam: float = 0.0,
    threads: int = 1,
) -> GradTriple:
    grads, _ = batch_grads_and_loss(params, samples, dictionary, lam=lam, threads=threads)
    return grads


def _loss_at(params: ModelParams, sample: Sample, dictionary: Dictionary) -> float:
    return cross_entropy(forward(params, sample, dictionary), sample.target_index)


def _holomorphic_loss(mats: dict[str, np.ndarray], sample: Sample, dictionary: Dictionary) -> complex:
    """Cross-entropy written with analytic operations only, so it accepts complex weights."""
    q, keys = sample.query, sample.keys
    s = keys.T @ (mats["W_K"].T @ (mats["W_Q"] @ q))
    e = np.exp(s - np.max(s.real))
    h0 = mats["W_V"] @ (keys @ (e / np.sum(e)))
    # sqrt of the bilinear sum, not of |h0|^2: no conjugate
    n = np.sqrt(np.sum(h0 * h0))
    if not abs(n.real) >= MIN_H0_NORM:
        raise DegenerateNormError(f"||h0|| = {abs(n.real):.3e} is below {MIN_H0_NORM:g}; layer norm undefined")
    logits = dictionary.tokens @ (h0 / n + q)
    shifted = logits - np.max(logits.real)
    return np.log(np.sum(np.exp(shifted))) - shifted[sample.target_index]


def complex_step_grads(
    params: ModelParams,
    sample: Sample,
    dictionary: Dictionary,
    step: float = COMPLEX_STEP,
) -> GradTriple:
    """
    Im(loss(W + i*step*E_ij)) / step for every entry.

    No difference of two losses is taken, so the result keeps full precision
    for entries many orders of magnitude below the largest one.
    """
    if not step > 0:
        raise ValueError(f"complex step must be > 0, got {step!r}")
    mats = {name: np.array(m, dtype=np.complex128) for name, m in params.as_dict().items()}
    out: dict[str, np.ndarray] = {}
    for name, mat in mats.items():
        grad = np.zeros(mat.shape, dtype=np.float64)
        for idx in np.ndindex(*mat.shape):
            orig = mat[idx]
            mat[idx] = orig + 1j * step
            grad[idx] = _holomorphic_loss(mats, sample, dictionary).imag / step
            mat[idx] = orig
        out[name] = grad
    return GradTriple(g_K=out["W_K"], g_Q=out["W_Q"], g_V=out["W_V"])


def fd_grads(params: ModelParams, sample: Sample, dictionary: Dictionary, step: float) -> GradTriple:
    """Central differences in every entry of W_K, W_Q and W_V."""
    if not step > 0:
        raise ValueError(f"finite-difference step must be > 0, got {step!r}")

    mats = {name: np.array(m, copy=True) for name, m in params.as_dict().items()}
    out: dict[str, np.ndarray] = {}
    for name, mat in mats.items():
        grad = np.zeros_like(mat)
        for idx in np.ndindex(*mat.shape):
            orig = mat[idx]
            mat[idx] = orig + step
            f_plus = _loss_at(ModelParams(**mats), sample, dictionary)
            mat[idx] = orig - step
            f_minus = _loss_at(ModelParams(**mats), sample, dictionary)
            mat[idx] = orig
            grad[idx] = (f_plus - f_minus) / (2.0 * step)
        out[name] = grad
    return GradTriple(g_K=out["W_K"], g_Q=out["W_Q"], g_V=out["W_V"])


def grad_check(
    params: ModelParams,
    sample: Sample,
    dictionary: Dictionary,
    *,
    step: float = 1e-5,
    floor: float = 1e-10,
    oracle: Literal["complex", "central"] = "complex",
) -> dict[str, float]:
    """
    Compares analytic and numerical gradients entry by entry.

    Entries with max(|analytic|, |numerical|) <= floor are skipped; every other
    entry is judged by |analytic - numerical| / max(|analytic|, |numerical|).
    The complex-step oracle carries no subtraction round-off, so that ratio
    stays meaningful down to the floor. With `oracle="central"` the check uses
    `fd_grads` at `step`, whose round-off is about 1e-16 / step in absolute
    terms and dominates entries far below the largest one.
    """
    analytic = analytic_grads(params, sample, dictionary).as_dict()
    if oracle == "complex":
        numeric = complex_step_grads(params, sample, dictionary).as_dict()
    elif oracle == "central":
        numeric = fd_grads(params, sample, dictionary, step).as_dict()
    else:
        raise ValueError(f"oracle must be 'complex' or 'central', got {oracle!r}")
    report: dict[str, float] = {}
    worst = 0.0
    for name in analytic:
        a, f = analytic[name], numeric[name]
        mag = np.maximum(np.abs(a), np.abs(f))
        mask = mag > floor
        if not np.any(mask):
            report[name] = 0.0
            continue
        rel = np.abs(a - f)[mask] / mag[mask]
        report[name] = float(np.max(rel))
        worst = max(worst, report[name])
    report["max_rel_error"] = worst
    logger.debug("grad check (%s): %s", oracle, report)
    return report
