"""Operator-facing command line: cache building, expansion, and evaluation.

Exit codes are a stable contract: 0 success, 1 user error, 2 infrastructure
error (e.g. the LM service is unreachable). All randomized behavior is
controlled solely by --rng-seed.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from growset.corpus_store import (
    CacheBuildError,
    CacheFormatError,
    VocabularyError,
    build_cache,
    load_cache,
    load_vocabulary,
)
from growset.entity_selection import AggregationMode
from growset.evaluation import evaluate_rankings, load_queries
from growset.expansion import ExpansionConfig, ExpansionError, expand, write_trace
from growset.lm import FixtureLm, LmClient, LmUnavailableError, RemoteLm

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with code 1, not 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_backend_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--endpoint", help="base URL of the LM service")
    group.add_argument("--fixture", type=Path, help="JSON fixture file with canned LM responses")
    parser.add_argument("--timeout", type=float, default=30.0, help="LM request timeout (s)")


def _add_expansion_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=5, help="occurrences per entity-class match")
    parser.add_argument("--beam-width", type=int, default=3)
    parser.add_argument("--max-class-len", type=int, default=3)
    parser.add_argument("--class-samples", type=int, default=30)
    parser.add_argument("--entity-samples", type=int, default=18)
    parser.add_argument("--target-size", type=int, default=50)
    parser.add_argument("--batch-size", type=int, default=10)
    parser.add_argument("--agg", choices=["mrr", "combsum"], default="mrr")
    parser.add_argument("--rng-seed", type=int, default=0)
    parser.add_argument(
        "--no-gate",
        action="store_true",
        help="disable negative-class filtering (ablation mode)",
    )


def _make_lm(args: argparse.Namespace) -> LmClient:
    if args.endpoint:
        return RemoteLm(args.endpoint, timeout=args.timeout)
    return FixtureLm.from_json(args.fixture)


def _make_config(args: argparse.Namespace) -> ExpansionConfig:
    return ExpansionConfig(
        target_size=args.target_size,
        k=args.k,
        beam_width=args.beam_width,
        max_class_len=args.max_class_len,
        class_samples=args.class_samples,
        entity_samples=args.entity_samples,
        batch_size=args.batch_size,
        agg_mode=AggregationMode(args.agg),
        rng_seed=args.rng_seed,
        use_class_gate=not args.no_gate,
    )


def cmd_build_cache(args: argparse.Namespace) -> int:
    vocab = load_vocabulary(args.vocab)
    lm = _make_lm(args)
    summary = build_cache(args.corpus, vocab, lm, args.out)
    print(f"entities\t{summary.entities_with_occurrences}/{len(vocab)}")
    print(f"occurrences\t{summary.count}")
    print(f"dim\t{summary.dim}")
    if summary.missing_surfaces:
        print(f"missing\t{','.join(summary.missing_surfaces)}")
    return 0


def cmd_expand(args: argparse.Namespace) -> int:
    if len(args.seed) != 3:
        raise ExpansionError(f"exactly 3 --seed values required, got {len(args.seed)}")
    vocab = load_vocabulary(args.vocab)
    store = load_cache(args.cache, vocab=vocab)
    lm = _make_lm(args)
    result = expand(args.seed, _make_config(args), store, vocab, lm)
    for rank, (surface, score) in enumerate(result.ranked_surfaces(vocab), start=1):
        if rank > args.target_size:
            break
        print(f"{rank}\t{surface}\t{score:.6f}")
    if args.trace:
        write_trace(result.trace, args.trace)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    vocab = load_vocabulary(args.vocab)
    store = load_cache(args.cache, vocab=vocab)
    lm = _make_lm(args)
    queries = load_queries(args.queries)
    cfg = _make_config(args)
    rankings = []
    for query in queries:
        result = expand(query.seeds, cfg, store, vocab, lm)
        rankings.append([surface for surface, _ in result.ranked_surfaces(vocab)])
    report = evaluate_rankings(queries, rankings, ks=(10, 20, 50))
    for k in (10, 20, 50):
        print(f"MAP@{k}\t{report.map_scores[k]:.3f}")
    if args.verbose:
        for label, aps in report.per_query.items():
            line = "\t".join(f"AP@{k}={aps[k]:.3f}" for k in (10, 20, 50))
            print(f"query {label}\t{line}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="growset", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build-cache", help="embed corpus occurrences into a cache file")
    p_build.add_argument("--vocab", type=Path, required=True)
    p_build.add_argument("--corpus", type=Path, required=True)
    p_build.add_argument("--out", type=Path, required=True)
    _add_backend_options(p_build)
    p_build.set_defaults(func=cmd_build_cache)

    p_expand = sub.add_parser("expand", help="expand a 3-entity seed set")
    p_expand.add_argument("--vocab", type=Path, required=True)
    p_expand.add_argument("--cache", type=Path, required=True)
    p_expand.add_argument(
        "--seed", action="append", default=[], help="seed entity surface (give exactly 3)"
    )
    p_expand.add_argument("--trace", type=Path, help="write a JSON-lines iteration trace here")
    _add_backend_options(p_expand)
    _add_expansion_options(p_expand)
    p_expand.set_defaults(func=cmd_expand)

    p_eval = sub.add_parser("evaluate", help="run MAP@K evaluation over a query file")
    p_eval.add_argument("--vocab", type=Path, required=True)
    p_eval.add_argument("--cache", type=Path, required=True)
    p_eval.add_argument("--queries", type=Path, required=True)
    p_eval.add_argument("--verbose", action="store_true", help="print per-query AP values")
    _add_backend_options(p_eval)
    _add_expansion_options(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors exit 1, --help exits 0
        return int(exc.code or 0)
    try:
        return args.func(args)
    except LmUnavailableError as err:
        print(f"growset: LM service error: {err}", file=sys.stderr)
        return 2
    except CacheBuildError as err:
        print(f"growset: {err}", file=sys.stderr)
        return 2 if isinstance(err.__cause__, LmUnavailableError) else 1
    except (
        VocabularyError,
        CacheFormatError,
        ExpansionError,
        ValueError,
        FileNotFoundError,
    ) as err:
        print(f"growset: {err}", file=sys.stderr)
        return 1


def entrypoint() -> None:  # pragma: no cover - console-script shim
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
