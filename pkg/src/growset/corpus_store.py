"""Vocabulary and contextualized-embedding storage.

The cache file is a length-prefixed binary record stream behind a JSON
header line: streamable, mmap-friendly, and bit-exact across round trips.
Embeddings are stored as 32-bit floats; all similarity math upstream runs
with 64-bit accumulation.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Iterator, Mapping, Sequence

import numpy as np

from growset.lm import LmError
from growset.probing import MASK, ProbeQuery

if TYPE_CHECKING:  # pragma: no cover
    from growset.lm import LmClient

logger = logging.getLogger(__name__)

# Fixed-width header so records can stream to disk before the count is known.
_HEADER_WIDTH = 160
# Similarity scoring subsamples entities with more occurrences than this cap;
# the subsample is seeded per entity and independent of the run seed.
DEFAULT_MAX_SIM_OCCURRENCES = 256
_SUBSAMPLE_SEED = 0x5EED


class VocabularyError(ValueError):
    """The vocabulary file violates its contract."""


class CacheFormatError(RuntimeError):
    """The cache file is malformed, truncated, or mismatched."""


class CacheBuildError(RuntimeError):
    """Cache construction aborted (typically an LM failure)."""


class MissingEntityError(KeyError):
    """An entity without corpus occurrences was used in scoring."""


def normalize_surface(surface: str) -> str:
    """Case-fold and collapse whitespace; the uniqueness key for surfaces."""
    return " ".join(surface.split()).casefold()


@dataclass(frozen=True)
class Vocabulary:
    """Entity surfaces with dense ids assigned in file order."""

    entries: tuple[tuple[int, str], ...]

    def __post_init__(self) -> None:
        seen: dict[str, int] = {}
        for expected_id, (entity_id, surface) in enumerate(self.entries):
            if entity_id != expected_id:
                raise VocabularyError(f"entity ids must be dense from 0, got {entity_id}")
            key = normalize_surface(surface)
            if not key:
                raise VocabularyError(f"empty surface for entity {entity_id}")
            if key in seen:
                raise VocabularyError(
                    f"duplicate surface {surface!r} (entity {entity_id}) collides with "
                    f"entity {seen[key]} after normalization"
                )
            seen[key] = entity_id
        object.__setattr__(self, "_by_norm", seen)

    @classmethod
    def from_surfaces(cls, surfaces: Iterable[str]) -> "Vocabulary":
        return cls(tuple(enumerate(surfaces)))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[int, str]]:
        return iter(self.entries)

    def surface(self, entity_id: int) -> str:
        return self.entries[entity_id][1]

    def id_of(self, surface: str) -> int | None:
        return self._by_norm.get(normalize_surface(surface))  # type: ignore[attr-defined]

    def hash_hex(self) -> str:
        joined = "\n".join(normalize_surface(s) for _, s in self.entries)
        return hashlib.sha256(joined.encode("utf-8")).hexdigest()


def load_vocabulary(path: str | Path) -> Vocabulary:
    """Load a UTF-8 vocabulary file, one entity surface per line."""
    surfaces: list[str] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            surface = line.strip()
            if not surface:
                raise VocabularyError(f"{path}: empty surface at line {lineno}")
            key = normalize_surface(surface)
            if key in seen:
                raise VocabularyError(
                    f"{path}: duplicate surface {surface!r} at line {lineno} "
                    f"(first seen at line {seen[key]})"
                )
            seen[key] = lineno
            surfaces.append(surface)
    if not surfaces:
        raise VocabularyError(f"{path}: empty vocabulary")
    return Vocabulary.from_surfaces(surfaces)


@dataclass(frozen=True)
class OccurrenceRecord:
    """One corpus occurrence of an entity with its mask-position embedding."""

    entity_id: int
    sentence_id: int
    span: tuple[int, int]  # (first token index, token count)
    vector: np.ndarray  # float32, length dim

    def __post_init__(self) -> None:
        if self.span[1] < 1:
            raise ValueError(f"span must be non-empty, got {self.span}")


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype(
        [
            ("entity_id", "<u4"),
            ("sentence_id", "<u4"),
            ("span_start", "<u2"),
            ("span_len", "<u2"),
            ("vector", "<f4", (dim,)),
        ]
    )


class EmbeddingStore:
    """Per-entity occurrence vectors plus derived context-free vectors.

    Immutable after construction and safe to share across threads; the
    normalized matrices used by the scoring kernels are built lazily and
    cached per subsample cap.
    """

    def __init__(self, dim: int, occurrences: Mapping[int, np.ndarray]):
        self.dim = dim
        self._occurrences: dict[int, np.ndarray] = {}
        self._context_free: dict[int, np.ndarray] = {}
        for entity_id, matrix in occurrences.items():
            matrix = np.asarray(matrix, dtype=np.float32).reshape(-1, dim)
            if matrix.shape[0] == 0:
                raise ValueError(f"entity {entity_id} has no occurrence vectors")
            self._occurrences[entity_id] = matrix
            self._context_free[entity_id] = matrix.mean(axis=0, dtype=np.float64).astype(
                np.float32
            )
        self._unit_cache: dict[tuple[int, int | None], np.ndarray] = {}
        self._index_cache: dict[int | None, tuple[np.ndarray, np.ndarray, tuple[int, ...]]] = {}
        self._unit_context_cache: tuple[np.ndarray, dict[int, int]] | None = None

    @property
    def entity_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self._occurrences))

    def __contains__(self, entity_id: int) -> bool:
        return entity_id in self._occurrences

    def __len__(self) -> int:
        return len(self._occurrences)

    def occurrences(self, entity_id: int) -> np.ndarray:
        try:
            return self._occurrences[entity_id]
        except KeyError:
            raise MissingEntityError(entity_id) from None

    def context_free(self, entity_id: int) -> np.ndarray:
        try:
            return self._context_free[entity_id]
        except KeyError:
            raise MissingEntityError(entity_id) from None

    def _subsample(self, matrix: np.ndarray, entity_id: int, cap: int | None) -> np.ndarray:
        if cap is None or matrix.shape[0] <= cap:
            return matrix
        rng = np.random.default_rng((_SUBSAMPLE_SEED, entity_id))
        keep = np.sort(rng.choice(matrix.shape[0], size=cap, replace=False))
        return matrix[keep]

    def unit_occurrences(
        self, entity_id: int, max_occurrences: int | None = DEFAULT_MAX_SIM_OCCURRENCES
    ) -> np.ndarray:
        """Unit-normalized float64 occurrence rows for similarity scoring."""
        key = (entity_id, max_occurrences)
        cached = self._unit_cache.get(key)
        if cached is None:
            matrix = self._subsample(self.occurrences(entity_id), entity_id, max_occurrences)
            cached = _unit_rows(matrix)
            self._unit_cache[key] = cached
        return cached

    def sim_index(
        self, entity_ids: Sequence[int], max_occurrences: int | None = DEFAULT_MAX_SIM_OCCURRENCES
    ) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
        """Concatenated unit occurrence rows + offsets for the batch kernel."""
        ids = tuple(entity_ids)
        blocks = [self.unit_occurrences(e, max_occurrences) for e in ids]
        offsets = np.zeros(len(blocks) + 1, dtype=np.int64)
        np.cumsum([b.shape[0] for b in blocks], out=offsets[1:])
        stacked = (
            np.ascontiguousarray(np.concatenate(blocks, axis=0))
            if blocks
            else np.empty((0, self.dim))
        )
        return stacked, offsets, ids

    def unit_context_free(self, entity_ids: Sequence[int]) -> np.ndarray:
        """Unit-normalized float64 context-free rows, aligned to entity_ids."""
        if self._unit_context_cache is None:
            ids = self.entity_ids
            matrix = (
                np.stack([self._context_free[e] for e in ids]).astype(np.float64)
                if ids
                else np.empty((0, self.dim))
            )
            self._unit_context_cache = (_unit_rows(matrix), {e: i for i, e in enumerate(ids)})
        matrix, index = self._unit_context_cache
        try:
            rows = [index[e] for e in entity_ids]
        except KeyError as err:
            raise MissingEntityError(err.args[0]) from None
        return matrix[rows]


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    out = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm vector cannot be unit-normalized")
    return np.ascontiguousarray(out / norms)


class _TokenMatcher:
    """Longest-match, non-overlapping, left-to-right entity matching.

    Case-insensitive comparison over whitespace tokens; the corpus is
    assumed to be pre-tokenized (one sentence per line, tokens separated
    by spaces).
    """

    def __init__(self, vocab: Vocabulary):
        self._by_first: dict[str, list[tuple[tuple[str, ...], int]]] = {}
        for entity_id, surface in vocab:
            tokens = tuple(normalize_surface(surface).split())
            self._by_first.setdefault(tokens[0], []).append((tokens, entity_id))
        for candidates in self._by_first.values():
            candidates.sort(key=lambda item: (-len(item[0]), item[1]))

    def matches(self, tokens: Sequence[str]) -> Iterator[tuple[int, int, int]]:
        """Yield (entity_id, start, length) spans."""
        folded = [t.casefold() for t in tokens]
        position = 0
        while position < len(folded):
            matched = False
            for candidate, entity_id in self._by_first.get(folded[position], ()):
                if tuple(folded[position : position + len(candidate)]) == candidate:
                    yield entity_id, position, len(candidate)
                    position += len(candidate)
                    matched = True
                    break
            if not matched:
                position += 1


@dataclass(frozen=True)
class CacheBuildSummary:
    count: int
    dim: int
    entities_with_occurrences: int
    missing_surfaces: tuple[str, ...]


def _pad_header(header: dict) -> bytes:
    line = json.dumps(header, separators=(",", ":"))
    if len(line) + 1 > _HEADER_WIDTH:
        raise CacheFormatError("cache header exceeds fixed width")
    return (line + " " * (_HEADER_WIDTH - len(line) - 1) + "\n").encode("ascii")


def build_cache(
    corpus_path: str | Path,
    vocab: Vocabulary,
    lm: "LmClient",
    out_path: str | Path,
    *,
    dim: int | None = None,
) -> CacheBuildSummary:
    """Embed every vocabulary-entity occurrence in the corpus into a cache file.

    Each occurrence is embedded by replacing the matched span with a single
    mask token and asking the LM for the mask-position embedding. Records
    stream to disk in input order.
    """
    matcher = _TokenMatcher(vocab)
    count = 0
    seen_entities: set[int] = set()
    with open(out_path, "wb") as out:
        out.write(_pad_header({"dim": 0, "vocab_hash": vocab.hash_hex(), "count": 0}))
        with open(corpus_path, encoding="utf-8") as corpus:
            for sentence_id, line in enumerate(corpus):
                tokens = line.split()
                if not tokens:
                    continue
                for entity_id, start, length in matcher.matches(tokens):
                    masked = " ".join(tokens[:start] + [MASK] + tokens[start + length :])
                    try:
                        vector = lm.embed_mask(ProbeQuery.from_text(masked))
                    except LmError as err:
                        raise CacheBuildError(
                            f"LM failed while embedding sentence {sentence_id}: {err}"
                        ) from err
                    except ValueError as err:
                        raise CacheBuildError(
                            f"cannot build a single-mask query for sentence {sentence_id}: {err}"
                        ) from err
                    if dim is None:
                        dim = int(vector.shape[0])
                    elif vector.shape[0] != dim:
                        raise CacheBuildError(
                            f"embedding dimension changed to {vector.shape[0]} (expected {dim}) "
                            f"at sentence {sentence_id}"
                        )
                    record = np.zeros(1, dtype=_record_dtype(dim))
                    record["entity_id"] = entity_id
                    record["sentence_id"] = sentence_id
                    record["span_start"] = start
                    record["span_len"] = length
                    record["vector"] = vector.astype("<f4")
                    out.write(record.tobytes())
                    count += 1
                    seen_entities.add(entity_id)
        out.seek(0)
        out.write(
            _pad_header({"dim": dim or 0, "vocab_hash": vocab.hash_hex(), "count": count})
        )
    missing = tuple(s for e, s in vocab if e not in seen_entities)
    for surface in missing:
        logger.warning("entity %r has no corpus occurrences", surface)
    return CacheBuildSummary(count, dim or 0, len(seen_entities), missing)


def _read_header(handle) -> dict:
    line = handle.readline(_HEADER_WIDTH * 4)
    try:
        header = json.loads(line)
        return {
            "dim": int(header["dim"]),
            "vocab_hash": str(header["vocab_hash"]),
            "count": int(header["count"]),
            "_size": len(line),
        }
    except (ValueError, KeyError, TypeError) as err:
        raise CacheFormatError("unreadable cache header") from err


def read_cache_records(path: str | Path) -> Iterator[OccurrenceRecord]:
    """Stream the raw occurrence records of a cache file."""
    with open(path, "rb") as handle:
        header = _read_header(handle)
        dtype = _record_dtype(header["dim"])
        for index in range(header["count"]):
            raw = handle.read(dtype.itemsize)
            if len(raw) != dtype.itemsize:
                offset = header["_size"] + index * dtype.itemsize
                raise CacheFormatError(f"{path}: truncated at byte offset {offset}")
            row = np.frombuffer(raw, dtype=dtype)[0]
            yield OccurrenceRecord(
                entity_id=int(row["entity_id"]),
                sentence_id=int(row["sentence_id"]),
                span=(int(row["span_start"]), int(row["span_len"])),
                vector=row["vector"].copy(),
            )


def write_cache(
    path: str | Path, dim: int, vocab_hash: str, records: Iterable[OccurrenceRecord]
) -> int:
    """Write occurrence records in the cache file format; returns the count."""
    dtype = _record_dtype(dim)
    count = 0
    with open(path, "wb") as out:
        out.write(_pad_header({"dim": dim, "vocab_hash": vocab_hash, "count": 0}))
        for record in records:
            if record.vector.shape != (dim,):
                raise CacheFormatError(
                    f"record for entity {record.entity_id} has dimension "
                    f"{record.vector.shape}, expected ({dim},)"
                )
            row = np.zeros(1, dtype=dtype)
            row["entity_id"] = record.entity_id
            row["sentence_id"] = record.sentence_id
            row["span_start"] = record.span[0]
            row["span_len"] = record.span[1]
            row["vector"] = record.vector.astype("<f4")
            out.write(row.tobytes())
            count += 1
        out.seek(0)
        out.write(_pad_header({"dim": dim, "vocab_hash": vocab_hash, "count": count}))
    return count


def load_cache(
    path: str | Path,
    *,
    expected_dim: int | None = None,
    vocab: Vocabulary | None = None,
) -> EmbeddingStore:
    """Load a cache file into an EmbeddingStore.

    Context-free vectors are the per-entity arithmetic mean of the
    occurrence vectors, accumulated in float64.
    """
    with open(path, "rb") as handle:
        header = _read_header(handle)
        dim, count = header["dim"], header["count"]
        if expected_dim is not None and dim != expected_dim:
            raise CacheFormatError(
                f"{path}: cache dimension {dim} does not match expected {expected_dim}"
            )
        if vocab is not None and header["vocab_hash"] != vocab.hash_hex():
            raise CacheFormatError(f"{path}: cache was built against a different vocabulary")
        dtype = _record_dtype(dim)
        body = handle.read()
    if len(body) < count * dtype.itemsize:
        full_records = len(body) // dtype.itemsize
        offset = header["_size"] + full_records * dtype.itemsize
        raise CacheFormatError(f"{path}: truncated at byte offset {offset}")
    rows = np.frombuffer(body[: count * dtype.itemsize], dtype=dtype)
    occurrences: dict[int, np.ndarray] = {}
    if count:
        order = np.argsort(rows["entity_id"], kind="stable")
        entity_ids = rows["entity_id"][order]
        vectors = rows["vector"][order]
        boundaries = np.flatnonzero(np.diff(entity_ids)) + 1
        for ids, block in zip(
            np.split(entity_ids, boundaries), np.split(vectors, boundaries)
        ):
            occurrences[int(ids[0])] = block.copy()
    store = EmbeddingStore(dim, occurrences)
    if vocab is not None:
        for entity_id, surface in vocab:
            if entity_id not in store:
                logger.warning(
                    "entity %r is in the vocabulary but absent from the cache", surface
                )
    return store
