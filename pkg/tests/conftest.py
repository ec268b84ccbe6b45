"""Shared fixture helpers for the test suite."""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from growset.class_ranking import ClassQueryEmbeddings
from growset.corpus_store import EmbeddingStore, Vocabulary
from growset.probing import ClassName


def unit(rows) -> np.ndarray:
    out = np.asarray(rows, dtype=np.float64)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def make_store(occurrences: dict[int, list[list[float]]]) -> EmbeddingStore:
    dim = len(next(iter(occurrences.values()))[0])
    return EmbeddingStore(dim, {e: np.asarray(v, dtype=np.float32) for e, v in occurrences.items()})


def make_xc(surface: str, vectors) -> ClassQueryEmbeddings:
    """Class query embeddings padded to the six required vectors."""
    rows = [np.asarray(v, dtype=np.float64) for v in vectors]
    while len(rows) < 6:
        rows.append(rows[-1])
    stacked = np.stack(rows[:6])
    return ClassQueryEmbeddings(
        class_name=ClassName.from_surface(surface),
        vectors=stacked.astype(np.float32),
        unit=unit(stacked),
    )


def exhaustive_topk_similarity(occ: np.ndarray, queries: np.ndarray, k: int) -> float:
    """Independent oracle: exhaustive maximization over all size-k subsets."""
    maxima = [max(float(np.dot(x, q)) for q in queries) for x in occ]
    kk = min(k, len(maxima))
    best = max(
        sum(maxima[i] for i in subset)
        for subset in itertools.combinations(range(len(maxima)), kk)
    )
    return best / kk


@pytest.fixture
def tiny_vocab() -> Vocabulary:
    return Vocabulary.from_surfaces(["alpha", "bravo", "charlie", "delta"])
