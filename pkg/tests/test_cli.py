"""Command-line surface: exit codes, output formats, and determinism."""
from __future__ import annotations

import json

import pytest

import growset.cli as cli
from growset.entity_selection import AggregationMode
from growset.evaluation import (
    SyntheticConfig,
    export_benchmark,
    generate_synthetic_benchmark,
)
from growset.expansion import ExpansionConfig, expand
from growset.lm import RecordingLm

# One set of knobs shared by the recording run and the CLI invocations.
_CFG = ExpansionConfig(
    target_size=12,
    k=2,
    beam_width=3,
    max_class_len=3,
    class_samples=5,
    entity_samples=4,
    batch_size=4,
    rng_seed=7,
)
_CFG_FLAGS = [
    "--target-size", "12",
    "--k", "2",
    "--class-samples", "5",
    "--entity-samples", "4",
    "--batch-size", "4",
    "--rng-seed", "7",
]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthetic benchmark exported to disk plus a recorded LM fixture."""
    directory = tmp_path_factory.mktemp("cli")
    bench = generate_synthetic_benchmark(
        SyntheticConfig(entities_per_cluster=6, occurrences_per_entity=3)
    )
    vocab_path, cache_path, query_path = export_benchmark(bench, directory)
    recorder = RecordingLm(bench.lm)
    for query in bench.queries:
        expand(query.seeds, _CFG, bench.store, bench.vocab, recorder)
        expand(
            query.seeds,
            ExpansionConfig(**{**_CFG.__dict__, "agg_mode": AggregationMode.COMBSUM}),
            bench.store,
            bench.vocab,
            recorder,
        )
    fixture_path = directory / "lm_fixture.json"
    recorder.save_fixture(fixture_path)
    return {
        "bench": bench,
        "vocab": vocab_path,
        "cache": cache_path,
        "queries": query_path,
        "fixture": fixture_path,
        "dir": directory,
    }


def _expand_args(ws, *extra):
    query = ws["bench"].queries[0]
    args = [
        "expand",
        "--vocab", str(ws["vocab"]),
        "--cache", str(ws["cache"]),
        "--fixture", str(ws["fixture"]),
        *_CFG_FLAGS,
    ]
    for seed in query.seeds:
        args += ["--seed", seed]
    return args + list(extra)


def test_expand_deterministic_stdout_and_trace(workspace, tmp_path, capsys):
    outputs = []
    traces = []
    for run in range(2):
        trace = tmp_path / f"trace{run}.jsonl"
        code = cli.main(_expand_args(workspace, "--trace", str(trace)))
        assert code == 0
        outputs.append(capsys.readouterr().out)
        traces.append(trace.read_bytes())
    assert outputs[0] == outputs[1]
    assert traces[0] == traces[1]
    lines = outputs[0].splitlines()
    assert len(lines) <= 12
    rank, surface, score = lines[0].split("\t")
    assert rank == "1" and surface.startswith("animals") and float(score) > 0


def test_expand_both_aggregation_modes_run(workspace, capsys):
    for mode in ("mrr", "combsum"):
        code = cli.main(_expand_args(workspace, "--agg", mode))
        assert code == 0
        assert capsys.readouterr().out


def test_expand_target_size_three_prints_seeds(workspace, capsys):
    code = cli.main(_expand_args(workspace, "--target-size", "3"))
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    surfaces = {line.split("\t")[1] for line in lines}
    assert surfaces == set(workspace["bench"].queries[0].seeds)


def test_expand_unknown_seed_exits_one(workspace, capsys):
    args = [
        "expand",
        "--vocab", str(workspace["vocab"]),
        "--cache", str(workspace["cache"]),
        "--fixture", str(workspace["fixture"]),
        "--seed", "unobtainium",
        "--seed", "animals_00",
        "--seed", "animals_01",
    ]
    assert cli.main(args) == 1
    assert "unobtainium" in capsys.readouterr().err


def test_expand_requires_three_seeds(workspace, capsys):
    args = _expand_args(workspace)[:-2]  # drop one --seed pair
    assert cli.main(args) == 1
    assert "3" in capsys.readouterr().err


def test_missing_required_flag_exits_one_with_usage(capsys):
    assert cli.main(["expand", "--cache", "x"]) == 1
    err = capsys.readouterr().err
    assert "usage" in err


def test_evaluate_prints_map_table(workspace, capsys):
    args = [
        "evaluate",
        "--vocab", str(workspace["vocab"]),
        "--cache", str(workspace["cache"]),
        "--queries", str(workspace["queries"]),
        "--fixture", str(workspace["fixture"]),
        *_CFG_FLAGS,
    ]
    assert cli.main(args) == 0
    out = capsys.readouterr().out
    assert "MAP@10\t1.000" in out
    assert "MAP@20" in out and "MAP@50" in out

    assert cli.main(args + ["--verbose"]) == 0
    verbose = capsys.readouterr().out
    assert "query animals" in verbose and "AP@10=" in verbose


def test_evaluate_empty_query_file_exits_one(workspace, tmp_path, capsys):
    empty = tmp_path / "empty.json"
    empty.write_text("[]")
    args = [
        "evaluate",
        "--vocab", str(workspace["vocab"]),
        "--cache", str(workspace["cache"]),
        "--queries", str(empty),
        "--fixture", str(workspace["fixture"]),
    ]
    assert cli.main(args) == 1
    assert "non-empty" in capsys.readouterr().err


def test_k_flag_forwarded_into_config(workspace, monkeypatch):
    captured = {}

    def spy(seeds, cfg, store, vocab, lm):
        captured["cfg"] = cfg
        raise cli.ExpansionError("stop early")

    monkeypatch.setattr(cli, "expand", spy)
    cli.main(_expand_args(workspace))
    assert captured["cfg"].k == 2
    assert captured["cfg"].rng_seed == 7


def test_build_cache_round_trip(tmp_path, capsys):
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("rose\ntulip\n")
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("a rose grows\nthe tulip blooms\n")
    fixture = tmp_path / "lm.json"
    fixture.write_text(
        json.dumps(
            {
                "embeddings": {
                    "a [MASK] grows": [1.0, 0.0],
                    "the [MASK] blooms": [0.0, 1.0],
                }
            }
        )
    )
    out = tmp_path / "cache.bin"
    args = [
        "build-cache",
        "--vocab", str(vocab),
        "--corpus", str(corpus),
        "--out", str(out),
        "--fixture", str(fixture),
    ]
    assert cli.main(args) == 0
    assert out.exists()
    printed = capsys.readouterr().out
    assert "occurrences\t2" in printed
    assert "dim\t2" in printed


def test_build_cache_unreachable_endpoint_exits_two(tmp_path, capsys):
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("rose\n")
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("a rose grows\n")
    endpoint = "http://127.0.0.1:9"
    args = [
        "build-cache",
        "--vocab", str(vocab),
        "--corpus", str(corpus),
        "--out", str(tmp_path / "cache.bin"),
        "--endpoint", endpoint,
        "--timeout", "0.2",
    ]
    assert cli.main(args) == 2
    assert endpoint in capsys.readouterr().err
