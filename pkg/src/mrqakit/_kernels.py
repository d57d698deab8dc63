"""Hot inner loops, JIT-compiled with numba when available.

Set MRQAKIT_NO_NUMBA=1 to force the pure-Python/NumPy path (same source
functions, just not compiled). benchmarks/bench_kernels.py compares the
two paths.
"""

from __future__ import annotations

import os

import numpy as np


def _env_disabled() -> bool:
    return os.environ.get("MRQAKIT_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}


def _span_topk_impl(start_logp, end_logp, ctx_begin, ctx_end, skip_pos, max_answer_len, beam):
    """Top-`beam` (start, end) pairs by start_logp[s] + end_logp[e].

    Candidates satisfy ctx_begin <= s <= e < min(ctx_end, s + max_answer_len)
    and avoid skip_pos. Ties resolve to the smaller (s, e); output is sorted
    by descending score then (s, e).
    """
    best_s = np.empty(beam, np.int64)
    best_e = np.empty(beam, np.int64)
    best_score = np.empty(beam, np.float64)
    count = 0
    for s in range(ctx_begin, ctx_end):
        if s == skip_pos:
            continue
        e_stop = s + max_answer_len
        if e_stop > ctx_end:
            e_stop = ctx_end
        for e in range(s, e_stop):
            if e == skip_pos:
                continue
            sc = start_logp[s] + end_logp[e]
            if count == beam and sc <= best_score[count - 1]:
                continue
            # first slot whose score is strictly below sc; equal scores keep
            # the earlier-generated (smaller (s, e)) candidate ahead
            pos = count if count < beam else beam - 1
            while pos > 0 and best_score[pos - 1] < sc:
                pos -= 1
            last = beam - 1 if count == beam else count
            for j in range(last, pos, -1):
                best_s[j] = best_s[j - 1]
                best_e[j] = best_e[j - 1]
                best_score[j] = best_score[j - 1]
            best_s[pos] = s
            best_e[pos] = e
            best_score[pos] = sc
            if count < beam:
                count += 1
    return best_s[:count], best_e[:count], best_score[:count]


def _count_windows_na_impl(lengths, window_lens, stride, ans_starts, ans_ends, ans_offsets):
    """Total and no-answer window counts over a batch of examples.

    Answer token spans (inclusive) are flattened CSR-style: example x owns
    spans ans_offsets[x]..ans_offsets[x+1]. A window is answerable iff it
    fully contains some span.
    """
    total = 0
    n_na = 0
    for x in range(lengths.shape[0]):
        length = lengths[x]
        width = window_lens[x]
        if length <= width:
            n_windows = 1
        else:
            n_windows = (length - width + stride - 1) // stride + 1
        total += n_windows
        lo = ans_offsets[x]
        hi = ans_offsets[x + 1]
        for i in range(n_windows):
            w_start = i * stride
            w_end = w_start + width
            if w_end > length:
                w_end = length
            contained = False
            for a in range(lo, hi):
                if ans_starts[a] >= w_start and ans_ends[a] < w_end:
                    contained = True
                    break
            if not contained:
                n_na += 1
    return total, n_na


def _weighted_draw_impl(weights, k, uniforms):
    """k sequential renormalized draws without replacement.

    Draw t picks the smallest index whose running prefix sum exceeds
    uniforms[t] * (remaining total); the drawn weight is then removed.
    A Fenwick tree keeps each draw O(log n).
    """
    n = weights.shape[0]
    tree = np.zeros(n + 1, np.float64)
    live = weights.copy()
    for i in range(1, n + 1):
        tree[i] += live[i - 1]
        j = i + (i & -i)
        if j <= n:
            tree[j] += tree[i]

    top_bit = 1
    while top_bit * 2 <= n:
        top_bit *= 2

    out = np.empty(k, np.int64)
    for t in range(k):
        # total remaining mass = prefix(n)
        total = 0.0
        i = n
        while i > 0:
            total += tree[i]
            i -= i & -i
        target = uniforms[t] * total

        pos = 0
        remaining = target
        bit = top_bit
        while bit > 0:
            nxt = pos + bit
            if nxt <= n and tree[nxt] <= remaining:
                remaining -= tree[nxt]
                pos = nxt
            bit >>= 1
        idx = pos  # 0-based: first index with prefix > target
        if idx >= n:
            idx = n - 1
        # guard against landing on an exhausted slot through float rounding
        while idx > 0 and live[idx] <= 0.0:
            idx -= 1
        while idx < n - 1 and live[idx] <= 0.0:
            idx += 1

        out[t] = idx
        delta = -live[idx]
        live[idx] = 0.0
        i = idx + 1
        while i <= n:
            tree[i] += delta
            i += i & -i
    return out


USING_NUMBA = False

if not _env_disabled():
    try:
        import numba

        span_topk = numba.njit(cache=True)(_span_topk_impl)
        count_windows_na = numba.njit(cache=True)(_count_windows_na_impl)
        weighted_draw = numba.njit(cache=True)(_weighted_draw_impl)
        USING_NUMBA = True
    except ImportError:
        pass

if not USING_NUMBA:
    span_topk = _span_topk_impl
    count_windows_na = _count_windows_na_impl
    weighted_draw = _weighted_draw_impl
