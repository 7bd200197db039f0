"""
Samplers for the three sequence distributions.

- ICL prompts: x_1, y_1, ..., x_J, y_J, x_{J+1}; words carry x_a * a_k, labels a_k.
- QA sentences: M common tokens with one anchor a_{k_S} at a uniform position,
  then the word. The answer a_k + y b_k is the target, never an input column.
- QA-ICL prompts: J full QA segments (prefix, word, answer) and one query
  segment without its answer.

Every word and label carries the co-task concept plus, independently for each
other concept, an extra concept with probability 1/K and its own random sign.
All samplers take a `numpy.random.Generator`; they hold no other state.
Noise is drawn even when its scale is 0 so the stream does not depend on sigma_p.
"""
# tvsim/datagen.py
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from tvsim.concept_space import label_token_index
from tvsim.types import ICL, QA, QA_ICL, ConceptBasis, ConceptSet, Sample


def _sign(rng: np.random.Generator) -> int:
    return 1 if rng.random() < 0.5 else -1


def _combine(
    basis: ConceptBasis,
    concepts: Iterable[tuple[int, int]],
    a_coef: float,
    noise_sd: float,
    rng: np.random.Generator,
) -> np.ndarray:
    pairs = sorted(set((int(k), int(s)) for k, s in concepts))
    if not pairs:
        raise ValueError("concept set must be non-empty")
    v = np.zeros(basis.d, dtype=np.float64)
    for k, s in pairs:
        v += a_coef * basis.a[k] + s * basis.b[k]
    return v + noise_sd * rng.standard_normal(basis.d)


def make_word(
    basis: ConceptBasis,
    concepts: Iterable[tuple[int, int]],
    x_a: float,
    noise_sd: float,
    rng: np.random.Generator,
) -> np.ndarray:
    return _combine(basis, concepts, x_a, noise_sd, rng)


def make_label(
    basis: ConceptBasis,
    concepts: Iterable[tuple[int, int]],
    noise_sd: float,
    rng: np.random.Generator,
) -> np.ndarray:
    return _combine(basis, concepts, 1.0, noise_sd, rng)


def _noiseless_label(basis: ConceptBasis, k: int, y: int) -> np.ndarray:
    return basis.a[k] + y * basis.b[k]


class _ExtraBudget:
    """Caps the total number of extra concepts handed out (None = no cap)."""

    def __init__(self, cap: int | None) -> None:
        self.cap = cap
        self.used = 0

    def take(self) -> bool:
        if self.cap is None:
            return True
        if self.used >= self.cap:
            return False
        self.used += 1
        return True


def _draw_concepts(
    co_task: int,
    sign: int,
    K: int,
    rng: np.random.Generator,
    budget: _ExtraBudget | None = None,
) -> ConceptSet:
    picks = rng.random(K) < 1.0 / K
    signs = np.where(rng.random(K) < 0.5, 1, -1)
    concepts = [(co_task, sign)]
    for k in range(K):
        if k == co_task or not picks[k]:
            continue
        if budget is not None and not budget.take():
            continue
        concepts.append((k, int(signs[k])))
    return tuple(concepts)


def _icl_sequence(
    basis: ConceptBasis,
    pair_tasks: Sequence[int],
    query_task: int,
    sigma_p: float,
    x_a: float,
    rng: np.random.Generator,
    *,
    extra_cap: int | None = None,
) -> tuple[np.ndarray, dict[int, ConceptSet], int]:
    K = basis.K
    word_budget = _ExtraBudget(extra_cap)
    label_budget = _ExtraBudget(extra_cap)
    cols: list[np.ndarray] = []
    concept_sets: dict[int, ConceptSet] = {}

    for k in pair_tasks:
        y = _sign(rng)
        X = _draw_concepts(k, y, K, rng, word_budget)
        concept_sets[len(cols)] = X
        cols.append(make_word(basis, X, x_a, sigma_p, rng))
        Y = _draw_concepts(k, y, K, rng, label_budget)
        concept_sets[len(cols)] = Y
        cols.append(make_label(basis, Y, sigma_p, rng))

    y_query = _sign(rng)
    X = _draw_concepts(query_task, y_query, K, rng, word_budget)
    concept_sets[len(cols)] = X
    cols.append(make_word(basis, X, x_a, sigma_p, rng))
    return np.column_stack(cols), concept_sets, y_query


def sample_icl_prompt(
    basis: ConceptBasis,
    J: int,
    sigma_p: float,
    x_a: float,
    rng: np.random.Generator,
) -> Sample:
    if J < 1:
        raise ValueError(f"J must be >= 1, got {J}")
    k_T = int(rng.integers(basis.K))
    columns, concept_sets, y = _icl_sequence(basis, [k_T] * J, k_T, sigma_p, x_a, rng)
    return Sample(
        columns=columns,
        kind=ICL,
        co_task=k_T,
        label_sign=y,
        target_index=label_token_index(k_T, y, basis.K),
        concept_sets=concept_sets,
    )


def _qa_segment(
    basis: ConceptBasis,
    k: int,
    y: int,
    M: int,
    sigma_p: float,
    x_a: float,
    rng: np.random.Generator,
    offset: int,
) -> tuple[list[np.ndarray], int, ConceptSet]:
    """Prefix of M tokens (one anchor) followed by the word; returns columns, anchor position, word concepts."""
    m_S = int(rng.integers(M))
    common = rng.integers(basis.K_prime, size=M)
    cols = []
    for m in range(M):
        base = basis.a[k] if m == m_S else basis.nu[common[m]]
        cols.append(base + sigma_p * rng.standard_normal(basis.d))
    X = _draw_concepts(k, y, basis.K, rng)
    cols.append(make_word(basis, X, x_a, sigma_p, rng))
    return cols, offset + m_S, X


def sample_qa_sentence(
    basis: ConceptBasis,
    M: int,
    sigma_p: float,
    x_a: float,
    rng: np.random.Generator,
) -> Sample:
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    if basis.K_prime < 1:
        raise ValueError("QA sentences need at least one common token (K_prime >= 1)")
    k_S = int(rng.integers(basis.K))
    y = _sign(rng)
    cols, anchor, X = _qa_segment(basis, k_S, y, M, sigma_p, x_a, rng, offset=0)
    return Sample(
        columns=np.column_stack(cols),
        kind=QA,
        co_task=k_S,
        label_sign=y,
        target_index=label_token_index(k_S, y, basis.K),
        anchor_positions=(anchor,),
        concept_sets={M: X},
    )


def sample_qa_icl_prompt(
    basis: ConceptBasis,
    J: int,
    M: int,
    sigma_p: float,
    x_a: float,
    rng: np.random.Generator,
) -> Sample:
    if J < 1 or M < 1:
        raise ValueError(f"J and M must be >= 1, got J={J}, M={M}")
    if basis.K_prime < 1:
        raise ValueError("QA-ICL prompts need at least one common token (K_prime >= 1)")
    k = int(rng.integers(basis.K))
    cols: list[np.ndarray] = []
    anchors: list[int] = []
    concept_sets: dict[int, ConceptSet] = {}
    y = 1
    for j in range(J + 1):
        y = _sign(rng)
        seg, anchor, X = _qa_segment(basis, k, y, M, sigma_p, x_a, rng, offset=len(cols))
        cols.extend(seg)
        anchors.append(anchor)
        concept_sets[len(cols) - 1] = X
        if j < J:
            concept_sets[len(cols)] = ((k, y),)
            cols.append(_noiseless_label(basis, k, y))
    return Sample(
        columns=np.column_stack(cols),
        kind=QA_ICL,
        co_task=k,
        label_sign=y,
        target_index=label_token_index(k, y, basis.K),
        anchor_positions=tuple(anchors),
        concept_sets=concept_sets,
    )


def sample_multi_concept_prompt(
    basis: ConceptBasis,
    task_set: Sequence[int],
    J_star: int,
    sigma_p: float,
    x_a: float,
    rng: np.random.Generator,
) -> Sample:
    """
    ICL prompt whose demonstration pairs spread over several co-tasks.

    Pair co-tasks are the task set repeated to length J_star and shuffled, so
    each task appears at least J_star // |task_set| times. The query co-task
    is drawn uniformly from the set. Extra concepts are capped at J_star // 20
    per role (words, labels).
    """
    tasks = tuple(int(k) for k in task_set)
    if not 1 <= len(tasks) <= 3:
        raise ValueError(f"task_set must hold 1 to 3 tasks, got {list(tasks)}")
    if len(set(tasks)) != len(tasks):
        raise ValueError(f"task_set has duplicates: {list(tasks)}")
    if any(not 0 <= k < basis.K for k in tasks):
        raise ValueError(f"task_set {list(tasks)} outside 0..{basis.K - 1}")
    if J_star < 1:
        raise ValueError(f"J_star must be >= 1, got {J_star}")

    pair_tasks = rng.permutation(np.resize(np.array(tasks), J_star)).tolist()
    query_task = tasks[int(rng.integers(len(tasks)))]
    columns, concept_sets, y = _icl_sequence(
        basis, pair_tasks, query_task, sigma_p, x_a, rng, extra_cap=J_star // 20
    )
    return Sample(
        columns=columns,
        kind=ICL,
        co_task=query_task,
        label_sign=y,
        target_index=label_token_index(query_task, y, basis.K),
        concept_sets=concept_sets,
        task_set=tasks,
    )


def sample_dataset(
    kind: str,
    basis: ConceptBasis,
    n: int,
    *,
    J: int,
    M: int,
    sigma_p: float,
    x_a: float,
    rng: np.random.Generator,
) -> list[Sample]:
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if kind == ICL:
        return [sample_icl_prompt(basis, J, sigma_p, x_a, rng) for _ in range(n)]
    if kind == QA:
        return [sample_qa_sentence(basis, M, sigma_p, x_a, rng) for _ in range(n)]
    if kind == QA_ICL:
        return [sample_qa_icl_prompt(basis, J, M, sigma_p, x_a, rng) for _ in range(n)]
    raise ValueError(f"Unknown sample kind: {kind}")


def strip_query(sample: Sample) -> Sample:
    """
    Demonstrations-only view of a prompt: the query word (ICL) or the whole
    query segment (QA-ICL) is dropped, so the last demo label becomes the
    attention query.
    """
    L = sample.length
    if sample.kind == ICL:
        keep = L - 1
    elif sample.kind == QA_ICL:
        segments = len(sample.anchor_positions)
        if segments < 2:
            raise ValueError("QA-ICL prompt has no demonstration segment")
        width = (L + 1) // segments
        keep = L - (width - 1)
    else:
        raise ValueError(f"{sample.kind!r} samples carry no demonstrations")
    if keep < 2:
        raise ValueError("demonstrations-only sequence is empty")

    last = sample.concept_sets.get(keep - 1)
    if not last:
        raise ValueError("last kept column is not a demonstration label")
    co_task = sample.co_task if not sample.task_set else last[0][0]
    sign = next(s for k, s in last if k == co_task)
    return Sample(
        columns=sample.columns[:, :keep].copy(),
        kind=sample.kind,
        co_task=co_task,
        label_sign=sign,
        target_index=label_token_index(co_task, sign),
        anchor_positions=tuple(p for p in sample.anchor_positions if p < keep),
        concept_sets={p: c for p, c in sample.concept_sets.items() if p < keep},
        task_set=sample.task_set,
    )


def label_balance(samples: Iterable[Sample], K: int) -> np.ndarray:
    """K x 2 counts of (co_task, sign); column 0 is y=+1, column 1 is y=-1."""
    counts = np.zeros((K, 2), dtype=np.int64)
    for s in samples:
        counts[s.co_task, 0 if s.label_sign == 1 else 1] += 1
    return counts
