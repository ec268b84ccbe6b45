"""The iterative expansion controller.

Each iteration regenerates candidate class names from the current set,
selects the positive and negative names, scores the entire vocabulary with
the gated rank ensemble, and rebuilds the set from scratch as the seeds
plus the best gate-passing entities. Membership is therefore not sticky:
an entity admitted earlier is dropped the moment a negative class name
outranks the positive one for it.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

from growset.class_ranking import (
    ClassEmbeddingCache,
    aggregate_class_ranks,
    rank_classes_for_entity,
    select_classes,
)
from growset.corpus_store import (
    DEFAULT_MAX_SIM_OCCURRENCES,
    EmbeddingStore,
    Vocabulary,
)
from growset.entity_selection import (
    AggregationMode,
    aggregate_entity_ranks,
    compute_gates,
    local_scores,
    rank_candidates_once,
)
from growset.lm import LmClient
from growset.probing import generate_class_names
from growset.ranked import RankedList

STAGNATION_LIMIT = 3  # stop after this many consecutive non-growing iterations


class ExpansionError(RuntimeError):
    """The expansion loop cannot proceed."""


@dataclass(frozen=True)
class ExpansionConfig:
    """Loop parameters; defaults follow the engine's standard operating point."""

    target_size: int = 50
    k: int = 5
    beam_width: int = 3
    max_class_len: int = 3
    class_samples: int = 30
    entity_samples: int = 18
    batch_size: int = 10
    agg_mode: AggregationMode = AggregationMode.MRR
    rng_seed: int = 0
    max_sim_occurrences: int | None = DEFAULT_MAX_SIM_OCCURRENCES
    use_class_gate: bool = True

    def __post_init__(self) -> None:
        positive_fields = (
            self.target_size,
            self.k,
            self.beam_width,
            self.max_class_len,
            self.class_samples,
            self.entity_samples,
            self.batch_size,
        )
        if any(value < 1 for value in positive_fields):
            raise ValueError("all expansion size parameters must be >= 1")


@dataclass(frozen=True)
class ExpansionState:
    """Mutable-by-replacement loop state."""

    seed_ids: tuple[int, ...]
    current_ids: tuple[int, ...]
    positive: str | None = None
    negatives: tuple[str, ...] = ()
    iteration: int = 0
    stagnation: int = 0


@dataclass(frozen=True)
class IterationSnapshot:
    """Audit record of one iteration, serializable as a JSON line."""

    iteration: int
    positive: str
    negatives: tuple[str, ...]
    added: tuple[str, ...]
    removed: tuple[str, ...]
    set_size: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "iteration": self.iteration,
                "positive": self.positive,
                "negatives": list(self.negatives),
                "added": list(self.added),
                "removed": list(self.removed),
                "set_size": self.set_size,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "IterationSnapshot":
        data = json.loads(line)
        return cls(
            iteration=data["iteration"],
            positive=data["positive"],
            negatives=tuple(data["negatives"]),
            added=tuple(data["added"]),
            removed=tuple(data["removed"]),
            set_size=data["set_size"],
        )


def snapshot(state: ExpansionState, vocab: Vocabulary, added: Iterable[int], removed: Iterable[int]) -> IterationSnapshot:
    """Serialize one iteration of the loop state for the trace output."""
    return IterationSnapshot(
        iteration=state.iteration,
        positive=state.positive or "",
        negatives=state.negatives,
        added=tuple(sorted(vocab.surface(e) for e in added)),
        removed=tuple(sorted(vocab.surface(e) for e in removed)),
        set_size=len(state.current_ids),
    )


def write_trace(snapshots: Sequence[IterationSnapshot], out: TextIO | str | Path) -> None:
    """Write the trace as JSON lines, one snapshot per iteration."""
    if isinstance(out, (str, Path)):
        with open(out, "w", encoding="utf-8") as handle:
            write_trace(snapshots, handle)
        return
    for snap in snapshots:
        out.write(snap.to_json() + "\n")


@dataclass(frozen=True)
class ExpansionResult:
    ranking: RankedList[int]  # full candidate universe, best first
    state: ExpansionState
    trace: tuple[IterationSnapshot, ...] = field(default_factory=tuple)

    def ranked_surfaces(self, vocab: Vocabulary) -> list[tuple[str, float]]:
        return [(vocab.surface(e), score) for e, score in self.ranking]


def _resolve_seeds(seeds: Sequence[str], vocab: Vocabulary, store: EmbeddingStore) -> tuple[int, ...]:
    if len(seeds) != 3:
        raise ExpansionError(f"expansion starts from exactly 3 seeds, got {len(seeds)}")
    ids = []
    for surface in seeds:
        entity_id = vocab.id_of(surface)
        if entity_id is None:
            raise ExpansionError(f"seed entity {surface!r} is not in the vocabulary")
        if entity_id not in store:
            raise ExpansionError(f"seed entity {surface!r} has no corpus occurrences")
        ids.append(entity_id)
    if len(set(ids)) != len(ids):
        raise ExpansionError("seed entities must be distinct")
    return tuple(ids)


def form_next_set(
    ranking: RankedList[int],
    gates: Mapping[int, bool],
    seed_ids: Sequence[int],
    cap: int,
) -> tuple[int, ...]:
    """Rebuild the set from scratch: seeds plus the best gate-true entities.

    Membership is not sticky; a previous member that fails the gate or
    scores 0 simply does not reappear.
    """
    new_ids = list(seed_ids)
    seed_set = set(seed_ids)
    for entity_id, score in ranking:
        if len(new_ids) >= cap:
            break
        if entity_id in seed_set:
            continue
        if gates[entity_id] and score > 0.0:
            new_ids.append(entity_id)
    return tuple(new_ids)


def expand(
    seeds: Sequence[str],
    cfg: ExpansionConfig,
    store: EmbeddingStore,
    vocab: Vocabulary,
    lm: LmClient,
) -> ExpansionResult:
    """Run the full class-guided expansion loop from a seed set.

    Returns the final ranking over every scorable entity (entities that
    were never admitted appear in the tail) plus the per-iteration trace.
    """
    seed_ids = _resolve_seeds(seeds, vocab, store)
    state = ExpansionState(seed_ids=seed_ids, current_ids=seed_ids)
    rng = random.Random(cfg.rng_seed)
    embeddings = ClassEmbeddingCache(lm)
    candidates = store.entity_ids
    trace: list[IterationSnapshot] = []

    if len(seed_ids) >= cfg.target_size:
        ranking = RankedList.from_scores(
            {e: 0.0 for e in seed_ids}, tie_key=vocab.surface
        )
        return ExpansionResult(ranking=ranking, state=state, trace=())

    ranking: RankedList[int] | None = None
    while True:
        state = replace(state, iteration=state.iteration + 1)
        current = state.current_ids

        pool = generate_class_names(
            [vocab.surface(e) for e in current],
            lm,
            rng,
            beam_width=cfg.beam_width,
            max_len=cfg.max_class_len,
            num_samples=cfg.class_samples,
        )
        if len(pool) == 0:
            raise ExpansionError("candidate class-name pool is empty")

        class_lists = {
            e: rank_classes_for_entity(
                e, pool, store, embeddings, cfg.k, max_occurrences=cfg.max_sim_occurrences
            )
            for e in current
        }
        aggregated = aggregate_class_ranks(list(class_lists.values()))
        selection = select_classes(aggregated, [class_lists[e] for e in seed_ids])
        negatives = sorted(selection.negatives, key=lambda c: c.surface)
        if not cfg.use_class_gate:
            negatives = []
        state = replace(
            state,
            positive=selection.positive.surface,
            negatives=tuple(c.surface for c in negatives),
        )

        positive_xc = embeddings.get(selection.positive)
        negative_xcs = [embeddings.get(c) for c in negatives]
        gates = compute_gates(
            candidates,
            positive_xc,
            negative_xcs,
            store,
            cfg.k,
            max_occurrences=cfg.max_sim_occurrences,
        )
        local = local_scores(
            candidates, positive_xc, store, cfg.k, max_occurrences=cfg.max_sim_occurrences
        )
        sampled_lists = [
            rank_candidates_once(
                rng.sample(current, 3),
                positive_xc,
                store,
                vocab,
                cfg.k,
                candidates=candidates,
                precomputed_local=local,
                max_occurrences=cfg.max_sim_occurrences,
            )
            for _ in range(cfg.entity_samples)
        ]
        scores = aggregate_entity_ranks(sampled_lists, set(current), gates, cfg.agg_mode)
        ranking = RankedList.from_scores(
            scores, tie_key=lambda e: (not gates[e], vocab.surface(e))
        )

        cap = min(cfg.target_size, len(current) + cfg.batch_size)
        new_ids = form_next_set(ranking, gates, seed_ids, cap)
        previous, now = set(current), set(new_ids)
        added = [e for e in new_ids if e not in previous]
        removed = [e for e in current if e not in now]
        grew = len(new_ids) > len(current)
        state = replace(
            state,
            current_ids=new_ids,
            stagnation=0 if grew else state.stagnation + 1,
        )
        trace.append(snapshot(state, vocab, added, removed))

        if len(state.current_ids) >= cfg.target_size or state.stagnation >= STAGNATION_LIMIT:
            break

    assert ranking is not None
    return ExpansionResult(ranking=ranking, state=state, trace=tuple(trace))
