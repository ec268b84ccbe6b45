"""Entity scoring and class-gated rank aggregation for one iteration.

Each candidate gets a local score (similarity to the positive class name),
a global score (mean cosine to a sampled subset of the current set), and
their geometric mean; T sampled rankings are ensembled into a single
per-entity score that a negative-class gate can zero out.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import AbstractSet, Mapping, Sequence

import numpy as np

from growset import kernels
from growset.class_ranking import ClassQueryEmbeddings, entity_class_similarity
from growset.corpus_store import DEFAULT_MAX_SIM_OCCURRENCES, EmbeddingStore, Vocabulary
from growset.ranked import RankedList

# Cosines can be negative; both geometric-mean factors are clamped here so
# the combined score stays defined and order-preserving on the positives.
SCORE_EPSILON = 1e-6


class AggregationMode(enum.Enum):
    MRR = "mrr"
    COMBSUM = "combsum"


def local_score(
    entity_id: int,
    positive: ClassQueryEmbeddings,
    store: EmbeddingStore,
    k: int,
    *,
    max_occurrences: int | None = DEFAULT_MAX_SIM_OCCURRENCES,
) -> float:
    """Similarity of the entity's best corpus occurrences to the positive class."""
    return entity_class_similarity(entity_id, positive, store, k, max_occurrences=max_occurrences)


def local_scores(
    candidates: Sequence[int],
    positive: ClassQueryEmbeddings,
    store: EmbeddingStore,
    k: int,
    *,
    max_occurrences: int | None = DEFAULT_MAX_SIM_OCCURRENCES,
) -> np.ndarray:
    """Vectorized local scores aligned to `candidates`."""
    occ, offsets, _ = store.sim_index(candidates, max_occurrences)
    return kernels.topk_mean_max_sim_batch(occ, offsets, positive.unit, k)


def global_score(entity_id: int, sample: Sequence[int], store: EmbeddingStore) -> float:
    """Mean cosine between context-free vectors of the entity and a sample."""
    if not sample:
        raise ValueError("sample must contain at least one entity")
    entity_row = store.unit_context_free([entity_id])[0]
    sample_rows = store.unit_context_free(sample)
    return float(np.mean(sample_rows @ entity_row))


def combine_scores(local: float, global_: float) -> float:
    """Geometric mean with both factors clamped to SCORE_EPSILON."""
    return math.sqrt(max(local, SCORE_EPSILON) * max(global_, SCORE_EPSILON))


@dataclass(frozen=True)
class ScoredCandidate:
    """Score breakdown for one candidate against one sampled subset."""

    entity_id: int
    local: float
    global_: float
    combined: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "combined", combine_scores(self.local, self.global_))


def score_candidate(
    entity_id: int,
    positive: ClassQueryEmbeddings,
    sample: Sequence[int],
    store: EmbeddingStore,
    k: int,
    *,
    max_occurrences: int | None = DEFAULT_MAX_SIM_OCCURRENCES,
) -> ScoredCandidate:
    """Diagnostic single-candidate scoring with the local/global breakdown."""
    return ScoredCandidate(
        entity_id=entity_id,
        local=local_score(entity_id, positive, store, k, max_occurrences=max_occurrences),
        global_=global_score(entity_id, sample, store),
    )


def rank_candidates_once(
    sample: Sequence[int],
    positive: ClassQueryEmbeddings,
    store: EmbeddingStore,
    vocab: Vocabulary,
    k: int,
    *,
    candidates: Sequence[int] | None = None,
    precomputed_local: np.ndarray | None = None,
    max_occurrences: int | None = DEFAULT_MAX_SIM_OCCURRENCES,
) -> RankedList[int]:
    """One sampled ranking over all candidate entities, including current members.

    `precomputed_local` (aligned to `candidates`) avoids recomputing the
    sample-independent local scores across the T sampled rankings.
    """
    ids = tuple(candidates) if candidates is not None else store.entity_ids
    local = (
        precomputed_local
        if precomputed_local is not None
        else local_scores(ids, positive, store, k, max_occurrences=max_occurrences)
    )
    sample_rows = store.unit_context_free(sample)
    global_ = store.unit_context_free(ids) @ sample_rows.mean(axis=0)
    combined = np.sqrt(
        np.maximum(local, SCORE_EPSILON) * np.maximum(global_, SCORE_EPSILON)
    )
    scores = {entity_id: float(score) for entity_id, score in zip(ids, combined)}
    return RankedList.from_scores(scores, tie_key=vocab.surface)


def class_gate(
    entity_id: int,
    positive: ClassQueryEmbeddings,
    negatives: Sequence[ClassQueryEmbeddings],
    store: EmbeddingStore,
    k: int,
    *,
    max_occurrences: int | None = DEFAULT_MAX_SIM_OCCURRENCES,
) -> bool:
    """True iff the positive class outranks every negative for this entity."""
    if not negatives:
        return True
    sim_p = entity_class_similarity(entity_id, positive, store, k, max_occurrences=max_occurrences)
    for negative in negatives:
        sim_n = entity_class_similarity(
            entity_id, negative, store, k, max_occurrences=max_occurrences
        )
        if not _positive_outranks(sim_p, positive, sim_n, negative):
            return False
    return True


def _positive_outranks(
    sim_p: float, positive: ClassQueryEmbeddings, sim_n: float, negative: ClassQueryEmbeddings
) -> bool:
    if sim_p != sim_n:
        return sim_p > sim_n
    return positive.class_name.surface < negative.class_name.surface


def compute_gates(
    candidates: Sequence[int],
    positive: ClassQueryEmbeddings,
    negatives: Sequence[ClassQueryEmbeddings],
    store: EmbeddingStore,
    k: int,
    *,
    max_occurrences: int | None = DEFAULT_MAX_SIM_OCCURRENCES,
) -> dict[int, bool]:
    """Vectorized class gate over many candidates."""
    ids = tuple(candidates)
    if not negatives:
        return {entity_id: True for entity_id in ids}
    occ, offsets, _ = store.sim_index(ids, max_occurrences)
    sim_p = kernels.topk_mean_max_sim_batch(occ, offsets, positive.unit, k)
    gates = np.ones(len(ids), dtype=bool)
    for negative in negatives:
        sim_n = kernels.topk_mean_max_sim_batch(occ, offsets, negative.unit, k)
        if positive.class_name.surface < negative.class_name.surface:
            gates &= sim_p >= sim_n
        else:
            gates &= sim_p > sim_n
    return {entity_id: bool(gate) for entity_id, gate in zip(ids, gates)}


def aggregate_entity_ranks(
    lists: Sequence[RankedList[int]],
    current_set: AbstractSet[int],
    gates: Mapping[int, bool],
    mode: AggregationMode,
) -> dict[int, float]:
    """Ensemble the T sampled rankings into per-entity scores.

    Every list must rank the same full candidate universe. Gate-false
    entities score exactly 0 regardless of their ranks.
    """
    if not lists:
        raise ValueError("need at least one sampled ranking")
    universe = lists[0].key_set()
    for ranked in lists[1:]:
        if ranked.key_set() != universe:
            raise ValueError("sampled rankings cover different candidate universes")

    totals = {entity_id: 0.0 for entity_id in universe}
    for ranked in lists:
        if mode is AggregationMode.MRR:
            for position, (entity_id, _) in enumerate(ranked.entries, start=1):
                totals[entity_id] += 1.0 / position
        else:
            scores = np.array([score for _, score in ranked.entries])
            low, high = float(scores.min()), float(scores.max())
            if high > low:
                for entity_id, score in ranked.entries:
                    totals[entity_id] += (score - low) / (high - low)
            # all scores equal: every scaled contribution is 0 by convention

    membership = float(len(lists))
    result: dict[int, float] = {}
    for entity_id in universe:
        if not gates.get(entity_id, True):
            result[entity_id] = 0.0
            continue
        bonus = membership if entity_id in current_set else 0.0
        result[entity_id] = bonus + totals[entity_id]
    return result
