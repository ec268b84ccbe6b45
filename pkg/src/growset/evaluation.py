"""MAP@K evaluation harness and synthetic planted-cluster benchmarks.

The synthetic benchmarks substitute for full-scale corpora: entities are
planted in clusters around mutually orthogonal unit centers, and a
deterministic rule-based LM backend answers exactly the probes the engine
can produce for them (class probes yield cluster labels, entity probes
yield the cluster centers). Everything is seeded and reproducible.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from growset.corpus_store import EmbeddingStore, OccurrenceRecord, Vocabulary, write_cache
from growset.lm import FixtureGapError, LmClient, MaskPrediction
from growset.probing import MASK, ClassName, render_entity_probes
from growset.ranked import RankedList


@dataclass(frozen=True)
class Query:
    """One evaluation query: a seed triple and its ground-truth class."""

    class_label: str
    seeds: tuple[str, str, str]
    ground_truth: frozenset[str]

    def __post_init__(self) -> None:
        if not set(self.seeds) <= self.ground_truth:
            raise ValueError(f"seeds of query {self.class_label!r} must be in the ground truth")


def load_queries(path: str | Path) -> list[Query]:
    """Load a JSON query file: [{"class": ..., "seeds": [...], "gt": [...]}]."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list) or not raw:
        raise ValueError(f"{path}: query file must be a non-empty JSON array")
    queries = []
    for index, item in enumerate(raw):
        try:
            seeds = tuple(item["seeds"])
            if len(seeds) != 3:
                raise ValueError("need exactly 3 seeds")
            queries.append(
                Query(
                    class_label=str(item["class"]),
                    seeds=seeds,
                    ground_truth=frozenset(item["gt"]),
                )
            )
        except (KeyError, TypeError, ValueError) as err:
            raise ValueError(f"{path}: malformed query at index {index}: {err}") from err
    return queries


def average_precision_at_k(
    ranked: RankedList[str] | Sequence[str],
    ground_truth: Iterable[str],
    k: int,
    *,
    seeds: Iterable[str] = (),
) -> float:
    """AP@K with seeds excluded from both the ranking and the ground truth.

    Normalized by min(|ground truth|, K) so a perfect short list scores 1.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    excluded = set(seeds)
    relevant = {g for g in ground_truth if g not in excluded}
    if not relevant:
        raise ValueError("ground truth is empty after seed exclusion")
    keys = ranked.keys() if isinstance(ranked, RankedList) else ranked
    hits = 0
    total = 0.0
    position = 0
    for key in keys:
        if key in excluded:
            continue
        position += 1
        if position > k:
            break
        if key in relevant:
            hits += 1
            total += hits / position
    return total / min(len(relevant), k)


def map_at_k(ap_values: Sequence[float]) -> float:
    """Arithmetic mean of per-query AP values."""
    if not ap_values:
        raise ValueError("need at least one query")
    return float(sum(ap_values)) / len(ap_values)


@dataclass(frozen=True)
class EvalReport:
    """MAP@K per cutoff plus the per-query AP values behind each mean."""

    map_scores: dict[int, float]
    per_query: dict[str, dict[int, float]]


def evaluate_rankings(
    queries: Sequence[Query],
    rankings: Sequence[RankedList[str] | Sequence[str]],
    ks: Sequence[int] = (10, 20, 50),
) -> EvalReport:
    if len(queries) != len(rankings):
        raise ValueError("one ranking per query required")
    per_query: dict[str, dict[int, float]] = {}
    for query, ranking in zip(queries, rankings):
        per_query[query.class_label] = {
            k: average_precision_at_k(ranking, query.ground_truth, k, seeds=query.seeds)
            for k in ks
        }
    map_scores = {k: map_at_k([aps[k] for aps in per_query.values()]) for k in ks}
    return EvalReport(map_scores=map_scores, per_query=per_query)


# --------------------------------------------------------------------------
# Synthetic planted-cluster benchmarks


@dataclass(frozen=True)
class SyntheticConfig:
    labels: tuple[str, ...] = ("animals", "colors", "metals")
    entities_per_cluster: int = 20
    dim: int = 8
    noise: float = 0.05
    occurrences_per_entity: int = 5
    rng_seed: int = 0


@dataclass(frozen=True)
class SyntheticBenchmark:
    vocab: Vocabulary
    store: EmbeddingStore
    lm: "SyntheticClusterLm"
    queries: tuple[Query, ...]
    labels: tuple[str, ...]
    centers: np.ndarray  # (len(labels), dim) unit rows
    cluster_of: Mapping[int, str]  # entity id -> cluster label


# Predicted for modifier-extension probes; each one fails the noun-phrase
# filter as a leading token, so the candidate pool stays at the labels.
_EXTENSION_PREDICTIONS = ("and", "the", "of")
_TOKEN_PUNCT = ",.;:!?"


class SyntheticClusterLm(LmClient):
    """Deterministic rule-based LM over a planted clustering.

    Class probes are answered with the cluster labels ranked by how many
    of the probed entities each cluster contains; entity probes for a
    label embed to that cluster's center. Any other query fails loudly,
    exactly like a table-driven fixture.
    """

    def __init__(
        self,
        labels: Sequence[str],
        centers: np.ndarray,
        entity_cluster: Mapping[str, int],  # surface -> label index
    ) -> None:
        super().__init__()
        reserved = {"such", "as", "including", "especially"} | set(_EXTENSION_PREDICTIONS)
        if reserved & set(labels):
            raise ValueError(f"labels collide with pattern scaffolding: {labels!r}")
        self._labels = tuple(labels)
        self._entity_cluster = dict(entity_cluster)
        self._embeddings: dict[str, np.ndarray] = {}
        for index, label in enumerate(self._labels):
            for query in render_entity_probes(ClassName.from_surface(label)):
                self._embeddings[query.text] = np.asarray(centers[index], dtype=np.float64)

    @property
    def dim(self) -> int:
        return next(iter(self._embeddings.values())).shape[0]

    def _predict(self, text: str, top_k: int) -> list[MaskPrediction]:
        tokens = [t.strip(_TOKEN_PUNCT) for t in text.split()]
        mask_pos = next(i for i, t in enumerate(text.split()) if MASK in t)
        known = set(self._labels) | set(_EXTENSION_PREDICTIONS)
        if mask_pos + 1 < len(tokens) and tokens[mask_pos + 1] in known:
            return [
                MaskPrediction(token, -float(i + 1))
                for i, token in enumerate(_EXTENSION_PREDICTIONS)
            ]
        counts = [0] * len(self._labels)
        matched = 0
        for token in tokens:
            cluster = self._entity_cluster.get(token)
            if cluster is not None:
                counts[cluster] += 1
                matched += 1
        if matched == 0:
            raise FixtureGapError(f"no planted entities recognized in query: {text!r}")
        order = sorted(range(len(self._labels)), key=lambda i: (-counts[i], i))
        return [
            MaskPrediction(self._labels[index], -float(rank + 1))
            for rank, index in enumerate(order)
        ]

    def _embed(self, text: str) -> np.ndarray:
        if text not in self._embeddings:
            raise FixtureGapError(f"no embedding rule for query: {text!r}")
        return self._embeddings[text]


def _cluster_store(
    centers_by_entity: Sequence[np.ndarray],
    noise_by_entity: Sequence[float],
    dim: int,
    occurrences_per_entity: int,
    rng: np.random.Generator,
) -> EmbeddingStore:
    occurrences = {}
    for entity_id, (center, noise) in enumerate(zip(centers_by_entity, noise_by_entity)):
        raw = center[None, :] + noise * rng.standard_normal((occurrences_per_entity, dim))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        occurrences[entity_id] = raw.astype(np.float32)
    return EmbeddingStore(dim, occurrences)


def _entity_surface(label: str, index: int) -> str:
    return f"{label}_{index:02d}"


def generate_synthetic_benchmark(cfg: SyntheticConfig) -> SyntheticBenchmark:
    """Planted clusters around mutually orthogonal centers."""
    n_clusters = len(cfg.labels)
    if n_clusters < 2:
        raise ValueError("need at least 2 clusters")
    if cfg.entities_per_cluster < 6:
        raise ValueError("need at least 6 entities per cluster")
    if cfg.dim < n_clusters:
        raise ValueError(
            f"dim={cfg.dim} cannot host {n_clusters} mutually orthogonal centers"
        )
    centers = np.eye(cfg.dim, dtype=np.float64)[:n_clusters]
    surfaces, entity_centers, entity_noise, cluster_of = [], [], [], {}
    for index, label in enumerate(cfg.labels):
        for i in range(cfg.entities_per_cluster):
            cluster_of[len(surfaces)] = label
            surfaces.append(_entity_surface(label, i))
            entity_centers.append(centers[index])
            entity_noise.append(cfg.noise)
    vocab = Vocabulary.from_surfaces(surfaces)
    rng = np.random.default_rng(cfg.rng_seed)
    store = _cluster_store(
        entity_centers, entity_noise, cfg.dim, cfg.occurrences_per_entity, rng
    )
    lm = SyntheticClusterLm(
        cfg.labels,
        centers,
        {surface: cluster_index(cfg.labels, cluster_of[i]) for i, surface in enumerate(surfaces)},
    )
    queries = tuple(
        Query(
            class_label=label,
            seeds=tuple(_entity_surface(label, i) for i in range(3)),
            ground_truth=frozenset(
                _entity_surface(label, i) for i in range(cfg.entities_per_cluster)
            ),
        )
        for label in cfg.labels
    )
    return SyntheticBenchmark(
        vocab=vocab,
        store=store,
        lm=lm,
        queries=queries,
        labels=cfg.labels,
        centers=centers,
        cluster_of=cluster_of,
    )


def cluster_index(labels: Sequence[str], label: str) -> int:
    return list(labels).index(label)


@dataclass(frozen=True)
class AdversarialConfig:
    """Two true clusters plus a tight distractor cluster between them."""

    true_labels: tuple[str, str] = ("animals", "colors")
    distractor_label: str = "beasts"
    entities_per_cluster: int = 20
    distractor_count: int = 12
    dim: int = 8
    true_noise: float = 0.35
    distractor_noise: float = 0.02
    distractor_angle_deg: float = 30.0
    occurrences_per_entity: int = 5
    rng_seed: int = 0


def generate_adversarial_benchmark(cfg: AdversarialConfig) -> SyntheticBenchmark:
    """Distractor centroid sits between the true centers, nearer the first."""
    if cfg.dim < 2:
        raise ValueError("dim must be >= 2")
    labels = cfg.true_labels + (cfg.distractor_label,)
    basis = np.eye(cfg.dim, dtype=np.float64)
    theta = np.deg2rad(cfg.distractor_angle_deg)
    distractor_center = np.cos(theta) * basis[0] + np.sin(theta) * basis[1]
    centers = np.vstack([basis[0], basis[1], distractor_center / np.linalg.norm(distractor_center)])
    sizes = (cfg.entities_per_cluster, cfg.entities_per_cluster, cfg.distractor_count)
    noises = (cfg.true_noise, cfg.true_noise, cfg.distractor_noise)
    surfaces, entity_centers, entity_noise, cluster_of = [], [], [], {}
    for index, label in enumerate(labels):
        for i in range(sizes[index]):
            cluster_of[len(surfaces)] = label
            surfaces.append(_entity_surface(label, i))
            entity_centers.append(centers[index])
            entity_noise.append(noises[index])
    vocab = Vocabulary.from_surfaces(surfaces)
    rng = np.random.default_rng(cfg.rng_seed)
    store = _cluster_store(
        entity_centers, entity_noise, cfg.dim, cfg.occurrences_per_entity, rng
    )
    lm = SyntheticClusterLm(
        labels,
        centers,
        {surface: cluster_index(labels, cluster_of[i]) for i, surface in enumerate(surfaces)},
    )
    queries = tuple(
        Query(
            class_label=label,
            seeds=tuple(_entity_surface(label, i) for i in range(3)),
            ground_truth=frozenset(
                _entity_surface(label, i) for i in range(cfg.entities_per_cluster)
            ),
        )
        for label in cfg.true_labels
    )
    return SyntheticBenchmark(
        vocab=vocab,
        store=store,
        lm=lm,
        queries=queries,
        labels=labels,
        centers=centers,
        cluster_of=cluster_of,
    )


def nearest_centroid_assignments(benchmark: SyntheticBenchmark) -> dict[int, str]:
    """Brute-force oracle: assign each entity to its most-cosine-similar center."""
    assignments = {}
    for entity_id in benchmark.store.entity_ids:
        row = benchmark.store.unit_context_free([entity_id])[0]
        sims = benchmark.centers @ row
        assignments[entity_id] = benchmark.labels[int(np.argmax(sims))]
    return assignments


def export_benchmark(benchmark: SyntheticBenchmark, directory: str | Path) -> tuple[Path, Path, Path]:
    """Write vocab, cache, and query files so the CLI can run the benchmark."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    vocab_path = directory / "vocab.txt"
    cache_path = directory / "embeddings.cache"
    query_path = directory / "queries.json"
    vocab_path.write_text(
        "\n".join(surface for _, surface in benchmark.vocab) + "\n", encoding="utf-8"
    )

    def records():
        sentence = 0
        for entity_id in benchmark.store.entity_ids:
            for vector in benchmark.store.occurrences(entity_id):
                yield OccurrenceRecord(
                    entity_id=entity_id,
                    sentence_id=sentence,
                    span=(0, 1),
                    vector=vector,
                )
                sentence += 1

    write_cache(cache_path, benchmark.store.dim, benchmark.vocab.hash_hex(), records())
    query_path.write_text(
        json.dumps(
            [
                {
                    "class": q.class_label,
                    "seeds": list(q.seeds),
                    "gt": sorted(q.ground_truth),
                }
                for q in benchmark.queries
            ],
            indent=2,
        ),
        encoding="utf-8",
    )
    return vocab_path, cache_path, query_path
