"""
Core data types shared by the simulator modules.

Key components:
- `ConceptBasis`: the orthonormal families {a_k}, {b_k}, {nu_k'} stored as
  row matrices.
- `Dictionary`: the fixed output tokens U (one row per token).
- `Sample`: one token sequence plus its ground-truth metadata.
- `ModelParams`, `ForwardTrace`, `GradTriple`, `GradCoefficients`: the model
  state and what a forward/backward pass produces.
- `ProjectionReport`, `FlowSpec`: diagnostic records.
- `validate_*` helpers that enforce the shape and norm contracts.

Arrays are float64 and treated as read-only once a record is built.
"""
# tvsim/types.py
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from tvsim.errors import DimensionError

ICL = "icl"
QA = "qa"
QA_ICL = "qa_icl"
SAMPLE_KINDS = (ICL, QA, QA_ICL)

TOKENS_PER_CONCEPT = 7
NORM_TOL = 1e-12

# (task id, sign) pairs active at one position.
ConceptSet = tuple[tuple[int, int], ...]


@dataclass(frozen=True, eq=False)
class ConceptBasis:
    """Orthonormal concept families. Rows of `a`, `b`, `nu` are unit vectors in R^d."""

    d: int
    a: np.ndarray  # K x d, high-level task concepts
    b: np.ndarray  # K x d, low-level bi-label concepts
    nu: np.ndarray  # K' x d, task-irrelevant common tokens

    @property
    def K(self) -> int:
        return int(self.a.shape[0])

    @property
    def K_prime(self) -> int:
        return int(self.nu.shape[0])

    def stacked(self) -> np.ndarray:
        """All 2K+K' vectors as rows, in the order a, b, nu."""
        return np.vstack([self.a, self.b, self.nu])


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Output tokens U as rows; 7 per concept block followed by the K' common tokens."""

    tokens: np.ndarray  # (7K + K') x d
    x_a: float
    K: int
    K_prime: int

    @property
    def size(self) -> int:
        return int(self.tokens.shape[0])


@dataclass(frozen=True, eq=False)
class Sample:
    """
    One model input. `columns` is d x L with the query as the last column.

    `concept_sets` maps a column index to the active (task, sign) pairs of a
    word or label at that position; common tokens and anchors carry no entry.
    """

    columns: np.ndarray
    kind: str
    co_task: int
    label_sign: int
    target_index: int
    anchor_positions: tuple[int, ...] = ()
    concept_sets: Mapping[int, ConceptSet] = field(default_factory=dict)
    task_set: tuple[int, ...] = ()

    @property
    def length(self) -> int:
        return int(self.columns.shape[1])

    @property
    def query(self) -> np.ndarray:
        return self.columns[:, -1]

    @property
    def keys(self) -> np.ndarray:
        return self.columns[:, :-1]

    def metadata(self) -> dict[str, Any]:
        """JSON-ready description without the float payload."""
        return {
            "kind": self.kind,
            "co_task": int(self.co_task),
            "label_sign": int(self.label_sign),
            "target_index": int(self.target_index),
            "anchor_positions": [int(p) for p in self.anchor_positions],
            "concept_sets": {
                str(pos): [[int(k), int(s)] for k, s in concepts]
                for pos, concepts in sorted(self.concept_sets.items())
            },
            "task_set": [int(k) for k in self.task_set],
            "length": self.length,
        }


@dataclass(frozen=True, eq=False)
class ModelParams:
    W_K: np.ndarray
    W_Q: np.ndarray
    W_V: np.ndarray

    @property
    def d(self) -> int:
        return int(self.W_V.shape[0])

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"W_K": self.W_K, "W_Q": self.W_Q, "W_V": self.W_V}


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    """Everything a forward pass computes; `pi` covers the L-1 key positions only."""

    pi: np.ndarray
    z: np.ndarray  # S_keys @ pi
    h0: np.ndarray
    h0_norm: float
    h: np.ndarray
    logits: np.ndarray
    omega: np.ndarray


@dataclass(frozen=True, eq=False)
class GradTriple:
    g_K: np.ndarray
    g_Q: np.ndarray
    g_V: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"W_K": self.g_K, "W_Q": self.g_Q, "W_V": self.g_V}


@dataclass(frozen=True, eq=False)
class GradCoefficients:
    iota: np.ndarray
    omega: np.ndarray
    pi: np.ndarray


@dataclass(frozen=True, eq=False)
class ProjectionReport:
    """Rows/columns follow `labels`: a0.., b0.., then the probed nu directions."""

    labels: tuple[str, ...]
    value_table: np.ndarray  # u^T W_V v
    kq_table: np.ndarray  # (W_Q u)^T (W_K v)

    def _index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError as e:
            raise KeyError(f"Unknown probe label: {label}") from e

    def value(self, u: str, v: str) -> float:
        return float(self.value_table[self._index(u), self._index(v)])

    def kq(self, u: str, v: str) -> float:
        return float(self.kq_table[self._index(u), self._index(v)])

    def to_dict(self) -> dict[str, Any]:
        return {
            "labels": list(self.labels),
            "value_table": self.value_table.tolist(),
            "kq_table": self.kq_table.tolist(),
        }


@dataclass(frozen=True)
class FlowSpec:
    """One surrogate-flow instance: recurrence kind, its parameters, start time and horizon."""

    kind: str
    params: Mapping[str, float]
    horizon: int
    t0: int = 0


def validate_basis(basis: ConceptBasis) -> None:
    """Checks shapes, unit norms and pairwise orthogonality."""
    d = int(basis.d)
    if basis.a.shape != basis.b.shape:
        raise DimensionError(f"a and b families differ in shape: {basis.a.shape} vs {basis.b.shape}")
    for name, fam in (("a", basis.a), ("b", basis.b), ("nu", basis.nu)):
        if fam.ndim != 2 or fam.shape[1] != d:
            raise DimensionError(f"{name} must have shape (n, {d}), got {fam.shape}")
    vecs = basis.stacked()
    if vecs.shape[0] == 0:
        return
    gram = vecs @ vecs.T
    off = gram - np.eye(vecs.shape[0])
    worst = float(np.max(np.abs(off)))
    if worst > NORM_TOL:
        raise ValueError(f"Basis is not orthonormal: max |G - I| = {worst:.3e}")


def validate_params(params: ModelParams, d: int | None = None) -> None:
    shapes = {name: m.shape for name, m in params.as_dict().items()}
    dims = {s for s in shapes.values()}
    if len(dims) != 1:
        raise DimensionError(f"Parameter shapes disagree: {shapes}")
    (shape,) = dims
    if len(shape) != 2 or shape[0] != shape[1]:
        raise DimensionError(f"Parameters must be square, got {shape}")
    if d is not None and shape[0] != d:
        raise DimensionError(f"Expected d={d}, parameters have d={shape[0]}")
    for name, m in params.as_dict().items():
        if not np.all(np.isfinite(m)):
            raise ValueError(f"{name} has non-finite entries")


def validate_sample(sample: Sample, dictionary: Dictionary | None = None) -> None:
    if sample.kind not in SAMPLE_KINDS:
        raise ValueError(f"Sample kind must be one of {list(SAMPLE_KINDS)}, got {sample.kind!r}")
    if sample.columns.ndim != 2 or sample.columns.shape[1] < 2:
        raise DimensionError(f"Sample needs a d x L matrix with L >= 2, got {sample.columns.shape}")
    if sample.label_sign not in (-1, 1):
        raise ValueError(f"label_sign must be +1 or -1, got {sample.label_sign!r}")
    # Multi-concept prompts spread their pairs over the whole task set.
    co_tasks = set(sample.task_set) or {sample.co_task}
    for pos, concepts in sample.concept_sets.items():
        if not any(k in co_tasks for k, _ in concepts):
            raise ValueError(f"Concept set at position {pos} misses every co-task in {sorted(co_tasks)}")
    if dictionary is not None and not 0 <= sample.target_index < dictionary.size:
        raise ValueError(
            f"target_index {sample.target_index} outside dictionary of size {dictionary.size}"
        )
