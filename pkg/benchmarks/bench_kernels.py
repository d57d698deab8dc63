"""Times the hot kernels under numba and under the pure-Python fallback.

The two paths run the same source functions; this script imports both in
one process (the compiled wrappers and the raw implementations) so the
comparison shares identical inputs.

    python3 benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from mrqakit import _kernels
from mrqakit._kernels import (
    _count_windows_na_impl,
    _span_topk_impl,
    _weighted_draw_impl,
)


def timed(fn, *args, repeat=3):
    best = float("inf")
    result = None
    for _ in range(repeat):
        started = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - started)
    return best, result


def bench_count_windows(n=100_000):
    gen = np.random.default_rng(1)
    lengths = gen.integers(400, 1201, size=n).astype(np.int64)
    widths = np.full(n, 489, np.int64)
    starts = np.minimum(gen.integers(0, 1200, size=n), lengths - 1).astype(np.int64)
    ends = np.minimum(starts + 2, lengths - 1)
    offsets = np.arange(n + 1, dtype=np.int64)
    args = (lengths, widths, 128, starts, ends, offsets)
    return args


def bench_span_topk():
    gen = np.random.default_rng(2)
    start = gen.normal(size=512)
    end = gen.normal(size=512)
    return (start, end, 24, 512, 0, 30, 20)


def bench_weighted(n=50_000, k=10_000):
    gen = np.random.default_rng(3)
    weights = gen.random(n) + 1e-3
    weights /= weights.sum()
    uniforms = gen.random(k)
    return (weights, k, uniforms)


def span_topk_many(fn, start, end, ctx_begin, ctx_end, skip, max_len, beam, rounds=200):
    for _ in range(rounds):
        fn(start, end, ctx_begin, ctx_end, skip, max_len, beam)


def main():
    if not _kernels.USING_NUMBA:
        raise SystemExit(
            "numba path is disabled (MRQAKIT_NO_NUMBA set or numba missing); "
            "nothing to compare"
        )

    rows = []

    args = bench_count_windows()
    _kernels.count_windows_na(*args)  # compile
    t_jit, r1 = timed(_kernels.count_windows_na, *args)
    t_py, r2 = timed(_count_windows_na_impl, *args, repeat=1)
    assert r1 == r2
    rows.append(("count_windows_na (100k examples)", t_py, t_jit))

    sargs = bench_span_topk()
    _kernels.span_topk(*sargs)  # compile
    t_jit, _ = timed(lambda: span_topk_many(_kernels.span_topk, *sargs))
    t_py, _ = timed(lambda: span_topk_many(_span_topk_impl, *sargs), repeat=1)
    rows.append(("span_topk (200 x 512-token segment)", t_py, t_jit))

    wargs = bench_weighted()
    _kernels.weighted_draw(*wargs)  # compile
    t_jit, d1 = timed(_kernels.weighted_draw, *wargs)
    t_py, d2 = timed(_weighted_draw_impl, *wargs, repeat=1)
    assert list(d1) == list(d2)
    rows.append(("weighted_draw (10k of 50k)", t_py, t_jit))

    name_width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{name_width}}  {'python':>10}  {'numba':>10}  {'speedup':>8}")
    print("-" * (name_width + 34))
    for name, t_py, t_jit in rows:
        print(f"{name:<{name_width}}  {t_py * 1e3:>8.1f}ms  {t_jit * 1e3:>8.1f}ms  {t_py / t_jit:>7.1f}x")


if __name__ == "__main__":
    main()
