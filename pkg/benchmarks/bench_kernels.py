#!/usr/bin/env python3
"""Benchmark the compiled scoring kernel against the NumPy fallback.

The workload mirrors one expansion iteration's hot loop: score every
vocabulary entity's occurrence block against a class's six query vectors
(per-occurrence max, then top-k mean). Run:

    python benchmarks/bench_kernels.py [--entities N] [--occ N] [--dim N]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from growset.kernels import _simnp

try:
    from growset.kernels import _simcy
except ImportError:
    _simcy = None


def make_workload(n_entities: int, occ_per_entity: int, dim: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    occ = rng.normal(size=(n_entities * occ_per_entity, dim))
    occ /= np.linalg.norm(occ, axis=1, keepdims=True)
    offsets = np.arange(0, n_entities + 1, dtype=np.int64) * occ_per_entity
    queries = rng.normal(size=(6, dim))
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    return np.ascontiguousarray(occ), offsets, np.ascontiguousarray(queries)


def bench(fn, occ, offsets, queries, k: int, repeats: int) -> float:
    fn(occ, offsets, queries, k)  # warm up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(occ, offsets, queries, k)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--entities", type=int, default=4000)
    parser.add_argument("--occ", type=int, default=32)
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    occ, offsets, queries = make_workload(args.entities, args.occ, args.dim)
    print(
        f"workload: {args.entities} entities x {args.occ} occurrences, "
        f"dim {args.dim}, k={args.k}"
    )

    t_np = bench(_simnp.topk_mean_max_sim_batch, occ, offsets, queries, args.k, args.repeats)
    print(f"numpy   {t_np * 1e3:9.2f} ms")
    if _simcy is None:
        print("cython  (extension not built)")
        return
    t_cy = bench(_simcy.topk_mean_max_sim_batch, occ, offsets, queries, args.k, args.repeats)
    print(f"cython  {t_cy * 1e3:9.2f} ms   ({t_np / t_cy:4.1f}x vs numpy)")

    a = _simnp.topk_mean_max_sim_batch(occ, offsets, queries, args.k)
    b = _simcy.topk_mean_max_sim_batch(occ, offsets, queries, args.k)
    print(f"max |numpy - cython| = {np.max(np.abs(a - b)):.3e}")


if __name__ == "__main__":
    main()
