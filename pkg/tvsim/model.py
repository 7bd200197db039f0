"""
Single-layer softmax-attention transformer with residual stream and fixed readout.

For a sequence S = [T_1, ..., T_L] with query q = T_L:

    pi  = softmax_j((W_K T_j)^T (W_Q q)),   j = 1..L-1
    h0  = W_V sum_j pi_j T_j
    h   = h0 / ||h0|| + q
    out = softmax(U h)

The query never attends to itself. W_O is the identity and is not stored.
"""
# tvsim/model.py
from __future__ import annotations

import numpy as np

from tvsim.errors import DegenerateNormError
from tvsim.types import Dictionary, ForwardTrace, ModelParams, Sample

MIN_H0_NORM = 1e-30


def softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x)
    e = np.exp(shifted)
    return e / np.sum(e)


def log_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x)
    return shifted - np.log(np.sum(np.exp(shifted)))


def init_params(d: int, sigma0: float, sigma1: float, seed: int) -> ModelParams:
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if sigma0 < 0 or sigma1 < 0:
        raise ValueError(f"init scales must be >= 0, got sigma0={sigma0}, sigma1={sigma1}")
    rng = np.random.default_rng(seed)
    W_K = sigma0 * rng.standard_normal((d, d))
    W_Q = sigma0 * rng.standard_normal((d, d))
    W_V = sigma1 * rng.standard_normal((d, d))
    return ModelParams(W_K=W_K, W_Q=W_Q, W_V=W_V)


def attention_logits(params: ModelParams, sample: Sample) -> np.ndarray:
    keys = sample.keys
    if keys.shape[1] < 1:
        raise ValueError("attention needs at least one key position (L >= 2)")
    # (W_K T_j)^T (W_Q q) = T_j^T (W_K^T W_Q q)
    probe = params.W_K.T @ (params.W_Q @ sample.query)
    return keys.T @ probe


def attention_weights(params: ModelParams, sample: Sample) -> np.ndarray:
    """Attention over the L-1 key positions; the query column itself gets no weight."""
    return softmax(attention_logits(params, sample))


def hidden_state(params: ModelParams, sample: Sample) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (pi, z, h0) with z = S_keys pi and h0 = W_V z."""
    pi = attention_weights(params, sample)
    z = sample.keys @ pi
    return pi, z, params.W_V @ z


def layer_norm(h0: np.ndarray) -> tuple[np.ndarray, float]:
    n = float(np.linalg.norm(h0))
    if not n >= MIN_H0_NORM:
        raise DegenerateNormError(f"||h0|| = {n:.3e} is below {MIN_H0_NORM:g}; layer norm undefined")
    return h0 / n, n


def readout(h: np.ndarray, dictionary: Dictionary) -> tuple[np.ndarray, np.ndarray]:
    logits = dictionary.tokens @ h
    return logits, softmax(logits)


def forward(params: ModelParams, sample: Sample, dictionary: Dictionary) -> ForwardTrace:
    pi, z, h0 = hidden_state(params, sample)
    h0_hat, n = layer_norm(h0)
    h = h0_hat + sample.query
    logits, omega = readout(h, dictionary)
    return ForwardTrace(pi=pi, z=z, h0=h0, h0_norm=n, h=h, logits=logits, omega=omega)


def predict(trace: ForwardTrace) -> int:
    # argmax keeps the first maximum, so ties go to the lowest index.
    return int(np.argmax(trace.logits))


def cross_entropy(trace: ForwardTrace, target_index: int) -> float:
    if not 0 <= target_index < trace.logits.shape[0]:
        raise ValueError(f"target_index {target_index} outside 0..{trace.logits.shape[0] - 1}")
    return max(0.0, float(-log_softmax(trace.logits)[target_index]))


def attention_entropy(pi: np.ndarray) -> float:
    p = pi[pi > 0]
    return float(-np.sum(p * np.log(p)))


def prediction_confidence(trace: ForwardTrace) -> float:
    return float(np.max(trace.omega))
