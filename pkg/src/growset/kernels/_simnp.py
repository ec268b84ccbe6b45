"""NumPy fallback for the occurrence-similarity kernels.

Inputs are unit-normalized float64 row matrices, so cosine reduces to a
dot product; accumulation stays in 64-bit throughout.
"""
from __future__ import annotations

import numpy as np


def topk_mean_max_sim(occ: np.ndarray, queries: np.ndarray, k: int) -> float:
    """Mean of the k largest per-occurrence maxima of occ·queriesᵀ.

    With fewer than k occurrences the mean runs over all of them.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if occ.shape[0] == 0:
        raise ValueError("no occurrence vectors")
    best = (occ @ queries.T).max(axis=1)
    kk = min(k, best.shape[0])
    if kk < best.shape[0]:
        best = np.partition(best, best.shape[0] - kk)[-kk:]
    return float(min(1.0, max(-1.0, best.mean())))


def topk_mean_max_sim_batch(
    occ: np.ndarray, offsets: np.ndarray, queries: np.ndarray, k: int
) -> np.ndarray:
    """Batched variant over row segments occ[offsets[i]:offsets[i+1]]."""
    if k < 1:
        raise ValueError("k must be >= 1")
    best = (occ @ queries.T).max(axis=1) if occ.shape[0] else np.empty(0)
    out = np.empty(offsets.shape[0] - 1, dtype=np.float64)
    for i in range(out.shape[0]):
        seg = best[offsets[i] : offsets[i + 1]]
        if seg.shape[0] == 0:
            raise ValueError(f"empty occurrence segment at index {i}")
        kk = min(k, seg.shape[0])
        if kk < seg.shape[0]:
            seg = np.partition(seg, seg.shape[0] - kk)[-kk:]
        out[i] = seg.mean()
    np.clip(out, -1.0, 1.0, out=out)
    return out
