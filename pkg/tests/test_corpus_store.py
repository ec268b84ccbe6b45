"""Vocabulary loading, cache build/load, and the binary format guarantees."""
from __future__ import annotations

import numpy as np
import pytest

from growset.corpus_store import (
    CacheBuildError,
    CacheFormatError,
    EmbeddingStore,
    MissingEntityError,
    VocabularyError,
    build_cache,
    load_cache,
    load_vocabulary,
    read_cache_records,
)
from growset.lm import FixtureLm, LmClient, MaskPrediction, LmUnavailableError


class _HashLm(LmClient):
    """Deterministic stand-in: embeds any single-mask text via hashing."""

    def __init__(self, dim: int = 4):
        super().__init__()
        self.dim = dim

    def _predict(self, text, top_k):  # pragma: no cover - unused
        return [MaskPrediction("x", -1.0)]

    def _embed(self, text):
        import hashlib

        digest = hashlib.sha256(text.encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.normal(size=self.dim)


def _write(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_vocabulary_ids_in_file_order(tmp_path):
    vocab = load_vocabulary(_write(tmp_path / "v.txt", ["USA", "China"]))
    assert vocab.entries == ((0, "USA"), (1, "China"))
    assert vocab.id_of("china") == 1


def test_vocabulary_rejects_casefold_duplicates(tmp_path):
    path = _write(tmp_path / "v.txt", ["china", "China"])
    with pytest.raises(VocabularyError, match="line 2"):
        load_vocabulary(path)


def test_vocabulary_rejects_empty_file(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("", encoding="utf-8")
    with pytest.raises(VocabularyError, match="empty vocabulary"):
        load_vocabulary(path)


def test_whitespace_normalization_in_uniqueness(tmp_path):
    path = _write(tmp_path / "v.txt", ["United  States", "united states"])
    with pytest.raises(VocabularyError):
        load_vocabulary(path)


def test_build_cache_masks_entity_span(tmp_path):
    vocab = load_vocabulary(_write(tmp_path / "v.txt", ["China"]))
    corpus = _write(tmp_path / "c.txt", ["He visited China ."])
    lm = FixtureLm(embeddings={"He visited [MASK] .": [1.0, 2.0]})
    out = tmp_path / "cache.bin"
    summary = build_cache(corpus, vocab, lm, out)
    assert summary.count == 1 and summary.dim == 2
    record = next(read_cache_records(out))
    assert record.entity_id == 0 and record.span == (2, 1)
    np.testing.assert_array_equal(record.vector, np.asarray([1.0, 2.0], dtype=np.float32))


def test_longest_match_wins(tmp_path):
    vocab = load_vocabulary(_write(tmp_path / "v.txt", ["United States", "States"]))
    corpus = _write(tmp_path / "c.txt", ["the United States border"])
    lm = FixtureLm(embeddings={"the [MASK] border": [0.5, 0.5]})
    out = tmp_path / "cache.bin"
    summary = build_cache(corpus, vocab, lm, out)
    records = list(read_cache_records(out))
    assert [r.entity_id for r in records] == [0]
    assert records[0].span == (1, 2)
    assert summary.missing_surfaces == ("States",)


def test_occurrence_count_preserved(tmp_path):
    vocab = load_vocabulary(_write(tmp_path / "v.txt", ["Japan"]))
    corpus = _write(
        tmp_path / "c.txt",
        ["Japan rose .", "We saw Japan .", "Japan again ."],
    )
    lm = _HashLm(dim=3)
    out = tmp_path / "cache.bin"
    build_cache(corpus, vocab, lm, out)
    store = load_cache(out, vocab=vocab)
    assert store.occurrences(0).shape == (3, 3)


def test_lm_failure_names_sentence(tmp_path):
    vocab = load_vocabulary(_write(tmp_path / "v.txt", ["China"]))
    corpus = _write(tmp_path / "c.txt", ["good line no entity", "China here"])

    class _FailingLm(_HashLm):
        def _embed(self, text):
            raise LmUnavailableError("backend down")

    with pytest.raises(CacheBuildError, match="sentence 1"):
        build_cache(corpus, vocab, _FailingLm(), tmp_path / "cache.bin")


def test_context_free_is_occurrence_mean(tmp_path):
    store = EmbeddingStore(2, {0: np.asarray([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32)})
    np.testing.assert_allclose(store.context_free(0), [0.5, 0.5], atol=1e-6)


def test_single_occurrence_mean_is_identity():
    vec = np.asarray([[0.25, -1.5, 3.0]], dtype=np.float32)
    store = EmbeddingStore(3, {7: vec})
    np.testing.assert_array_equal(store.context_free(7), vec[0])


def test_dimension_mismatch_guard(tmp_path):
    vocab = load_vocabulary(_write(tmp_path / "v.txt", ["China"]))
    corpus = _write(tmp_path / "c.txt", ["China ."])
    out = tmp_path / "cache.bin"
    build_cache(corpus, vocab, _HashLm(dim=4), out)
    with pytest.raises(CacheFormatError, match="dimension"):
        load_cache(out, expected_dim=8)


def test_truncated_cache_reports_offset(tmp_path):
    vocab = load_vocabulary(_write(tmp_path / "v.txt", ["China"]))
    corpus = _write(tmp_path / "c.txt", ["China .", "China again"])
    out = tmp_path / "cache.bin"
    build_cache(corpus, vocab, _HashLm(dim=4), out)
    data = out.read_bytes()
    out.write_bytes(data[:-5])
    with pytest.raises(CacheFormatError, match="byte offset"):
        load_cache(out)


def test_cache_round_trip_bit_exact(tmp_path):
    vocab = load_vocabulary(_write(tmp_path / "v.txt", ["alpha", "beta phrase"]))
    corpus = _write(
        tmp_path / "c.txt",
        ["alpha meets beta phrase today", "nothing here", "alpha alone"],
    )
    lm = _HashLm(dim=6)
    first = tmp_path / "one.bin"
    second = tmp_path / "two.bin"
    build_cache(corpus, vocab, lm, first)
    build_cache(corpus, vocab, _HashLm(dim=6), second)
    assert first.read_bytes() == second.read_bytes()

    store = load_cache(first, vocab=vocab)
    for record in read_cache_records(first):
        matrix = store.occurrences(record.entity_id)
        assert any(np.array_equal(row, record.vector) for row in matrix)


def test_mean_invariant_over_random_stores():
    rng = np.random.default_rng(42)
    for _ in range(25):
        n = int(rng.integers(1, 9))
        dim = int(rng.integers(1, 6))
        matrix = rng.normal(size=(n, dim)).astype(np.float32)
        store = EmbeddingStore(dim, {0: matrix})
        expected = matrix.astype(np.float64).mean(axis=0)
        assert np.max(np.abs(store.context_free(0) - expected)) < 1e-6


def test_missing_entity_raises():
    store = EmbeddingStore(2, {0: np.asarray([[1.0, 0.0]], dtype=np.float32)})
    with pytest.raises(MissingEntityError):
        store.occurrences(99)
    with pytest.raises(MissingEntityError):
        store.unit_context_free([99])


def test_vocab_hash_mismatch_detected(tmp_path):
    vocab = load_vocabulary(_write(tmp_path / "v.txt", ["China"]))
    other = load_vocabulary(_write(tmp_path / "w.txt", ["Japan"]))
    corpus = _write(tmp_path / "c.txt", ["China ."])
    out = tmp_path / "cache.bin"
    build_cache(corpus, vocab, _HashLm(), out)
    with pytest.raises(CacheFormatError, match="different vocabulary"):
        load_cache(out, vocab=other)


def test_subsampling_caps_unit_occurrences():
    rng = np.random.default_rng(0)
    matrix = rng.normal(size=(300, 4)).astype(np.float32)
    store = EmbeddingStore(4, {0: matrix})
    capped = store.unit_occurrences(0, max_occurrences=256)
    assert capped.shape == (256, 4)
    again = store.unit_occurrences(0, max_occurrences=256)
    np.testing.assert_array_equal(capped, again)
    full = store.unit_occurrences(0, max_occurrences=None)
    assert full.shape == (300, 4)
