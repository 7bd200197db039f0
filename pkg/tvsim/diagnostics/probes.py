"""Projection probes of the value and key-query matrices on concept directions."""
# tvsim/diagnostics/probes.py
from __future__ import annotations

import numpy as np

from tvsim.config import SETTINGS
from tvsim.types import ConceptBasis, ModelParams, ProjectionReport


def projection_probe(
    params: ModelParams,
    basis: ConceptBasis,
    *,
    n_nu: int | None = None,
) -> ProjectionReport:
    """
    value_table[i, j] = u_i^T W_V u_j and kq_table[i, j] = (W_Q u_i)^T (W_K u_j)
    over u in {a_k}, {b_k} and the first `n_nu` common-token directions.
    """
    n_nu = SETTINGS.PROBE_NU if n_nu is None else n_nu
    n_nu = max(0, min(n_nu, basis.K_prime))
    B = np.vstack([basis.a, basis.b, basis.nu[:n_nu]])
    labels = (
        tuple(f"a{k}" for k in range(basis.K))
        + tuple(f"b{k}" for k in range(basis.K))
        + tuple(f"nu{k}" for k in range(n_nu))
    )
    value_table = B @ params.W_V @ B.T
    kq_table = (params.W_Q @ B.T).T @ (params.W_K @ B.T)
    return ProjectionReport(labels=labels, value_table=value_table, kq_table=kq_table)


def _off_diagonal_max(table: np.ndarray) -> float:
    if table.shape[0] < 2:
        return 0.0
    mask = ~np.eye(table.shape[0], dtype=bool)
    return float(np.max(np.abs(table[mask])))


def probe_summary(report: ProjectionReport, K: int) -> dict[str, list[float] | float]:
    """
    Diagonal a/b projections per concept plus the largest off-diagonal
    magnitude within the a/b block of each table.
    """
    v = report.value_table
    kq = report.kq_table
    idx_a = np.arange(K)
    idx_b = np.arange(K, 2 * K)
    block = np.arange(2 * K)
    return {
        "aVa": v[idx_a, idx_a].tolist(),
        "bVb": v[idx_b, idx_b].tolist(),
        "aKQa": kq[idx_a, idx_a].tolist(),
        "bKQb": kq[idx_b, idx_b].tolist(),
        "v_cross_max": _off_diagonal_max(v[np.ix_(block, block)]),
        "kq_cross_max": _off_diagonal_max(kq[np.ix_(block, block)]),
    }


def memorization_ratio(report: ProjectionReport, K: int) -> float:
    """max_k |b_k^T W_V b_k| / min_k a_k^T W_V a_k (inf when the a-diagonal is not positive)."""
    summary = probe_summary(report, K)
    a_min = min(summary["aVa"])
    b_max = max(abs(x) for x in summary["bVb"])
    if a_min <= 0:
        return float("inf")
    return b_max / a_min
