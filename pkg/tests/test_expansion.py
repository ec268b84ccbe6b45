"""The iterative controller: growth, filtration, stopping, and the trace."""
from __future__ import annotations

import pytest

from growset.evaluation import (
    SyntheticConfig,
    generate_synthetic_benchmark,
)
from growset.expansion import (
    ExpansionConfig,
    ExpansionError,
    IterationSnapshot,
    expand,
    form_next_set,
    write_trace,
)
from growset.ranked import RankedList


@pytest.fixture(scope="module")
def benchmark():
    return generate_synthetic_benchmark(
        SyntheticConfig(entities_per_cluster=8, occurrences_per_entity=4)
    )


def _cfg(**overrides):
    defaults = dict(
        target_size=20, class_samples=8, entity_samples=6, batch_size=5, rng_seed=11
    )
    defaults.update(overrides)
    return ExpansionConfig(**defaults)


def test_expansion_grows_within_cluster(benchmark):
    query = benchmark.queries[0]
    result = expand(query.seeds, _cfg(), benchmark.store, benchmark.vocab, benchmark.lm)
    label = query.class_label
    current = {benchmark.vocab.surface(e) for e in result.state.current_ids}
    assert set(query.seeds) <= current
    assert all(surface.startswith(label) for surface in current)
    top = [benchmark.vocab.surface(e) for e, _ in result.ranking.top(8)]
    assert all(surface.startswith(label) for surface in top)


def test_seed_persistence_across_iterations(benchmark):
    query = benchmark.queries[1]
    result = expand(query.seeds, _cfg(), benchmark.store, benchmark.vocab, benchmark.lm)
    seed_ids = set(result.state.seed_ids)
    sizes = []
    members = set(result.state.seed_ids)
    for snap in result.trace:
        sizes.append(snap.set_size)
        assert snap.set_size <= 20
    assert seed_ids <= set(result.state.current_ids)
    # growth per iteration is bounded by the batch size
    previous = 3
    for size in sizes:
        assert size - previous <= 5
        previous = size


def test_target_size_equal_to_seeds_exits_immediately(benchmark):
    query = benchmark.queries[0]
    result = expand(
        query.seeds, _cfg(target_size=3), benchmark.store, benchmark.vocab, benchmark.lm
    )
    assert result.state.iteration == 0
    assert result.trace == ()
    surfaces = {benchmark.vocab.surface(e) for e, _ in result.ranking}
    assert surfaces == set(query.seeds)


def test_unknown_seed_rejected(benchmark):
    with pytest.raises(ExpansionError, match="nonsuch"):
        expand(
            ("nonsuch", *benchmark.queries[0].seeds[1:]),
            _cfg(),
            benchmark.store,
            benchmark.vocab,
            benchmark.lm,
        )


def test_determinism_same_seed_identical_output(benchmark):
    query = benchmark.queries[2]
    first = expand(query.seeds, _cfg(rng_seed=5), benchmark.store, benchmark.vocab, benchmark.lm)
    second = expand(query.seeds, _cfg(rng_seed=5), benchmark.store, benchmark.vocab, benchmark.lm)
    assert first.ranking.entries == second.ranking.entries
    assert [s.to_json() for s in first.trace] == [s.to_json() for s in second.trace]


def test_trace_length_equals_iterations(benchmark):
    query = benchmark.queries[0]
    result = expand(query.seeds, _cfg(), benchmark.store, benchmark.vocab, benchmark.lm)
    assert len(result.trace) == result.state.iteration
    assert all(
        snap.iteration == i + 1 for i, snap in enumerate(result.trace)
    )


def test_stagnation_stops_after_three_flat_iterations(benchmark):
    # a target larger than the cluster forces the loop to stall at the
    # cluster boundary: the gate rejects every other-cluster entity
    query = benchmark.queries[0]
    result = expand(
        query.seeds, _cfg(target_size=15), benchmark.store, benchmark.vocab, benchmark.lm
    )
    assert result.state.stagnation == 3
    assert len(result.state.current_ids) == 8  # the planted cluster size
    flat = [snap.set_size for snap in result.trace[-3:]]
    assert flat == [8, 8, 8]


def test_gated_entities_rank_below_gate_true(benchmark):
    query = benchmark.queries[0]
    result = expand(query.seeds, _cfg(), benchmark.store, benchmark.vocab, benchmark.lm)
    label = query.class_label
    scores = dict(result.ranking.entries)
    in_cluster = [e for e in scores if benchmark.cluster_of[e] == label]
    out_cluster = [e for e in scores if benchmark.cluster_of[e] != label]
    assert max(scores[e] for e in out_cluster) == 0.0
    assert min(scores[e] for e in in_cluster) > 0.0


def test_membership_is_not_sticky():
    # entity 7 was a member last iteration but now fails the gate: it must
    # not reappear, while gate-true entities refill the set
    ranking = RankedList([(7, 5.0), (4, 3.0), (5, 2.0), (6, 0.0)])
    gates = {7: False, 4: True, 5: True, 6: True}
    new_set = form_next_set(ranking, gates, seed_ids=(0,), cap=3)
    assert 7 not in new_set
    assert new_set == (0, 4, 5)  # entity 6 has score 0 and is excluded too


def test_exactly_three_seeds_required(benchmark):
    with pytest.raises(ExpansionError, match="3 seeds"):
        expand(
            benchmark.queries[0].seeds[:2],
            _cfg(),
            benchmark.store,
            benchmark.vocab,
            benchmark.lm,
        )


def test_snapshot_round_trip():
    snap = IterationSnapshot(
        iteration=2,
        positive="countries",
        negatives=("states", "cities"),
        added=("japan",),
        removed=("europe",),
        set_size=7,
    )
    assert IterationSnapshot.from_json(snap.to_json()) == snap


def test_write_trace_is_json_lines(tmp_path, benchmark):
    query = benchmark.queries[0]
    result = expand(query.seeds, _cfg(), benchmark.store, benchmark.vocab, benchmark.lm)
    out = tmp_path / "trace.jsonl"
    write_trace(result.trace, out)
    lines = out.read_text().splitlines()
    assert len(lines) == len(result.trace)
    parsed = [IterationSnapshot.from_json(line) for line in lines]
    assert parsed == list(result.trace)


def test_trace_add_remove_deltas_reconstruct_set_sizes(benchmark):
    query = benchmark.queries[0]
    result = expand(query.seeds, _cfg(), benchmark.store, benchmark.vocab, benchmark.lm)
    seen: set[str] = set(query.seeds)
    for snap in result.trace:
        for surface in snap.removed:
            assert surface in seen
        seen |= set(snap.added)
        seen -= set(snap.removed)
        assert len(seen) == snap.set_size
