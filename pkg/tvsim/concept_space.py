"""
Concept vectors and the fixed output dictionary.

The basis is a random signed selection of standard basis vectors, so every
pairwise dot product is exactly 0 and every norm exactly 1. The dictionary
lists, for each concept k, the normalized tokens

    a_k + b_k, a_k - b_k, x_a a_k + b_k, x_a a_k - b_k, a_k, b_k, -b_k

followed by the K' common tokens nu_1..nu_K'.
"""
# tvsim/concept_space.py
from __future__ import annotations

import logging

import numpy as np

from tvsim.errors import DimensionError
from tvsim.types import TOKENS_PER_CONCEPT, ConceptBasis, Dictionary

logger = logging.getLogger(__name__)

DEFAULT_X_A = 0.1


def build_concept_basis(d: int, K: int, K_prime: int, seed: int) -> ConceptBasis:
    if d < 1 or K < 1 or K_prime < 0:
        raise DimensionError(f"Need d >= 1, K >= 1, K_prime >= 0; got d={d}, K={K}, K_prime={K_prime}")
    needed = 2 * K + K_prime
    if needed > d:
        raise DimensionError(f"2K+K_prime={needed} orthonormal vectors do not fit in d={d}")

    rng = np.random.default_rng(seed)
    coords = rng.permutation(d)[:needed]
    signs = rng.choice(np.array([-1.0, 1.0]), size=needed)

    vecs = np.zeros((needed, d), dtype=np.float64)
    vecs[np.arange(needed), coords] = signs

    logger.debug("built concept basis d=%d K=%d K'=%d seed=%d", d, K, K_prime, seed)
    return ConceptBasis(d=d, a=vecs[:K], b=vecs[K : 2 * K], nu=vecs[2 * K :])


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def build_dictionary(basis: ConceptBasis, x_a: float = DEFAULT_X_A) -> Dictionary:
    if not x_a > 0:
        raise ValueError(f"x_a must be > 0, got {x_a!r}")
    rows: list[np.ndarray] = []
    for a, b in zip(basis.a, basis.b):
        block = (a + b, a - b, x_a * a + b, x_a * a - b, a, b, -b)
        rows.extend(_unit(v) for v in block)
    rows.extend(_unit(v) for v in basis.nu)
    tokens = np.vstack(rows) if rows else np.zeros((0, basis.d))
    return Dictionary(tokens=tokens, x_a=float(x_a), K=basis.K, K_prime=basis.K_prime)


def label_token_index(k: int, y: int, K: int | None = None) -> int:
    """Index of LN(a_k + y b_k): slot 0 of block k for y=+1, slot 1 for y=-1."""
    if y not in (-1, 1):
        raise ValueError(f"label sign must be +1 or -1, got {y!r}")
    if k < 0 or (K is not None and k >= K):
        raise ValueError(f"task id {k} out of range for K={K}")
    return TOKENS_PER_CONCEPT * k + (0 if y == 1 else 1)


def basis_matrix(basis: ConceptBasis) -> tuple[np.ndarray, tuple[str, ...]]:
    labels = (
        tuple(f"a{k}" for k in range(basis.K))
        + tuple(f"b{k}" for k in range(basis.K))
        + tuple(f"nu{k}" for k in range(basis.K_prime))
    )
    return basis.stacked(), labels


def nearest_token(dictionary: Dictionary, vector: np.ndarray) -> int:
    # np.argmax returns the first maximum, i.e. the lowest index on ties.
    return int(np.argmax(dictionary.tokens @ vector))
