"""Scoring and selection of candidate class names against the corpus.

An entity-class similarity is the mean over the entity's k best-matching
corpus occurrences of their maximum cosine against the six entity-probe
mask embeddings of the class. Per-entity rankings are ensembled into one
list by reciprocal-rank summation, from which one positive class name and
a set of negative class names are selected.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from growset import kernels
from growset.corpus_store import DEFAULT_MAX_SIM_OCCURRENCES, EmbeddingStore
from growset.probing import CandidateClassPool, ClassName, render_entity_probes
from growset.ranked import RankedList

if TYPE_CHECKING:  # pragma: no cover
    from growset.lm import LmClient


@dataclass(frozen=True)
class ClassQueryEmbeddings:
    """The six entity-probe mask embeddings of one class name."""

    class_name: ClassName
    vectors: np.ndarray  # (6, dim) float32, as returned by the LM
    unit: np.ndarray  # (6, dim) float64, unit rows for cosine scoring

    @classmethod
    def from_lm(cls, class_name: ClassName, lm: "LmClient") -> "ClassQueryEmbeddings":
        raw = [lm.embed_mask(query) for query in render_entity_probes(class_name)]
        dims = {v.shape[0] for v in raw}
        if len(dims) != 1:
            raise ValueError(f"inconsistent embedding dims for {class_name.surface!r}: {dims}")
        vectors = np.stack(raw).astype(np.float32)
        return cls(class_name=class_name, vectors=vectors, unit=_unit_rows(vectors))


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    out = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm class query embedding")
    return np.ascontiguousarray(out / norms)


class ClassEmbeddingCache:
    """Computes class query embeddings once per class name per run."""

    def __init__(self, lm: "LmClient"):
        self._lm = lm
        self._cache: dict[str, ClassQueryEmbeddings] = {}

    def get(self, class_name: ClassName) -> ClassQueryEmbeddings:
        found = self._cache.get(class_name.surface)
        if found is None:
            found = ClassQueryEmbeddings.from_lm(class_name, self._lm)
            self._cache[class_name.surface] = found
        return found


def entity_class_similarity(
    entity_id: int,
    xc: ClassQueryEmbeddings,
    store: EmbeddingStore,
    k: int,
    *,
    max_occurrences: int | None = DEFAULT_MAX_SIM_OCCURRENCES,
) -> float:
    """Mean of the k best per-occurrence maxima of cosine against xc.

    Entities with fewer than k occurrences average over all of them.
    """
    occ = store.unit_occurrences(entity_id, max_occurrences)
    return kernels.topk_mean_max_sim(occ, xc.unit, k)


def rank_classes_for_entity(
    entity_id: int,
    pool: CandidateClassPool | Sequence[ClassName],
    store: EmbeddingStore,
    embeddings: Mapping[str, ClassQueryEmbeddings] | ClassEmbeddingCache,
    k: int,
    *,
    max_occurrences: int | None = DEFAULT_MAX_SIM_OCCURRENCES,
) -> RankedList[ClassName]:
    """Rank the candidate pool for one entity, best first."""
    names = list(pool)
    if not names:
        raise ValueError("candidate class pool is empty")
    lookup = embeddings.get if isinstance(embeddings, ClassEmbeddingCache) else None
    scores: dict[ClassName, float] = {}
    for name in names:
        xc = lookup(name) if lookup else embeddings[name.surface]
        scores[name] = entity_class_similarity(
            entity_id, xc, store, k, max_occurrences=max_occurrences
        )
    return RankedList.from_scores(scores, tie_key=lambda c: c.surface)


def aggregate_class_ranks(lists: Sequence[RankedList[ClassName]]) -> RankedList[ClassName]:
    """Ensemble per-entity class rankings by reciprocal-rank summation."""
    if not lists:
        raise ValueError("no ranked lists to aggregate")
    universe = lists[0].key_set()
    for ranked in lists[1:]:
        if ranked.key_set() != universe:
            raise ValueError("ranked lists cover different candidate pools")
    scores = {name: sum(1.0 / ranked.rank(name) for ranked in lists) for name in universe}
    return RankedList.from_scores(scores, tie_key=lambda c: c.surface)


@dataclass(frozen=True)
class ClassSelection:
    """The positive class name and the negative class names bounding it."""

    positive: ClassName
    negatives: frozenset[ClassName]

    def __post_init__(self) -> None:
        if self.positive in self.negatives:
            raise ValueError("positive class name cannot also be negative")


def select_classes(
    aggregated: RankedList[ClassName],
    seed_lists: Sequence[RankedList[ClassName]],
) -> ClassSelection:
    """Pick the top aggregated class as positive; classes ranked below it in
    every seed entity's list become negatives."""
    if len(aggregated) == 0:
        raise ValueError("cannot select classes from an empty ranking")
    positive = aggregated.keys()[0]
    negatives = frozenset(
        name
        for name in aggregated.keys()[1:]
        if all(ranked.rank(name) > ranked.rank(positive) for ranked in seed_lists)
    )
    return ClassSelection(positive=positive, negatives=negatives)
