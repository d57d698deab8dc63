"""Acceptance suite: one test per release criterion, one PASS line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines. The
integration check against real downloaded training data is skipped unless
MRQAKIT_MRQA_DATA points at a directory of MRQA-format .jsonl.gz files.
"""

from __future__ import annotations

import functools
import glob
import json
import math
import os
import time

import numpy as np
import pytest

from conftest import brute_force_windows, example_from_text, random_example
from mrqakit import _kernels
from mrqakit.augment import jaccard_2gram, remap_answer
from mrqakit.dataset_io import read_dataset, write_dataset
from mrqakit.metrics import macro_average, score_question
from mrqakit.sampling import normalize, score, weighted_sample
from mrqakit.segmenter import plan_windows, segment_example
from mrqakit.spans import LogitsRecord, best_spans_in_segment, log_softmax


def criterion(name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"\nACCEPTANCE FAIL {name}", flush=True)
                raise
            print(f"\nACCEPTANCE PASS {name}", flush=True)
            return result

        return run

    return wrap


@criterion("segmentation-oracle")
def test_segmentation_oracle_1000_random_cases():
    gen = np.random.default_rng(7)
    started = time.perf_counter()
    for _ in range(1000):
        length = int(gen.integers(1, 2001))
        width = int(gen.integers(16, 513))
        stride = int(gen.integers(16, width + 1))
        plan = plan_windows(length, width, stride)
        assert plan.windows == brute_force_windows(length, width, stride)

        # coverage: starts at 0, ends at L, no gaps between consecutive windows
        assert plan.windows[0][0] == 0
        assert plan.windows[-1][1] == length
        for (s1, e1), (s2, e2) in zip(plan.windows, plan.windows[1:]):
            assert s2 > s1 and e2 >= e1
            assert s2 <= e1  # overlap, never a gap
            assert e1 - s2 == width - stride

        # no token is in more than ceil(W/D) windows
        cap = math.ceil(width / stride)
        for token in gen.integers(0, length, size=8):
            appearances = sum(1 for s, e in plan.windows if s <= token < e)
            assert 1 <= appearances <= cap
    elapsed = time.perf_counter() - started
    print(f"segmentation oracle: 1000 cases in {elapsed:.2f}s")
    assert elapsed < 5.0


@criterion("na-accounting")
def test_na_accounting_matches_brute_force_exactly():
    from mrqakit.segmenter import dataset_stats, effective_window, used_question_tokens

    gen = np.random.default_rng(13)
    examples = [
        random_example(gen, qid=f"q{i}", min_tokens=20, max_tokens=900, n_answers=int(gen.integers(1, 4)))
        for i in range(300)
    ]
    stats = dataset_stats(examples, max_seq_len=96, doc_stride=32)[0]

    total = 0
    n_na = 0
    for example in examples:
        width = effective_window(96, len(used_question_tokens(example, 96, "model_budget")))
        for w_start, w_end in brute_force_windows(len(example.context_tokens), width, 32):
            total += 1
            if not any(
                a.token_span[0] >= w_start and a.token_span[1] < w_end
                for a in example.qa.detected_answers
            ):
                n_na += 1
    assert stats.n_segments == total
    assert stats.na_fraction == n_na / total  # zero tolerance
    print(f"na accounting: {n_na}/{total} no-answer windows, fraction {stats.na_fraction:.4f}")


@pytest.mark.skipif(
    not os.environ.get("MRQAKIT_MRQA_DATA"),
    reason="integration check needs downloaded MRQA training data "
    "(set MRQAKIT_MRQA_DATA to the directory of .jsonl.gz files); "
    "explicitly not required for the desk-scale suite",
)
@criterion("published-corpus-integration")
def test_published_corpus_segment_counts():
    from mrqakit.segmenter import dataset_stats

    data_dir = os.environ["MRQAKIT_MRQA_DATA"]
    paths = sorted(glob.glob(os.path.join(data_dir, "*.jsonl.gz")))
    assert paths, f"no .jsonl.gz files under {data_dir}"
    all_stats = []
    for path in paths:
        all_stats.extend(dataset_stats(read_dataset(path), max_seq_len=512, doc_stride=128))
    by_name = {s.dataset: s for s in all_stats}
    squad = by_name["SQuAD"]
    assert abs(squad.n_segments - 87_000) <= 0.02 * 87_000
    assert abs(squad.na_fraction - 0.001) <= 0.005
    total = sum(s.n_segments for s in all_stats)
    total_na = sum(s.na_fraction * s.n_segments for s in all_stats)
    assert abs(total_na / total - 0.473) <= 0.015
    print(f"integration: SQuAD {squad.n_segments} segments, corpus NA {total_na / total:.3f}")


@criterion("difficulty-distributions")
def test_difficulty_score_distribution_and_draws():
    probs = normalize([score("hard", 0.0, epsilon=0.01), score("hard", 1.0, epsilon=0.01)])
    assert abs(probs[0] - 1.01 / 1.02) < 1e-12
    assert abs(probs[1] - 0.01 / 1.02) < 1e-12

    hits = 0
    trials = 100_000
    for seed in range(trials):
        if weighted_sample([0, 1], probs, 1, seed=seed)[0] == 0:
            hits += 1
    freq = hits / trials
    assert abs(freq - probs[0]) < 0.01
    print(f"difficulty distributions: P={probs[0]:.6f}, observed {freq:.6f} over {trials} draws")


@criterion("jaccard-heuristic")
def test_jaccard_heuristic_and_identity_recovery():
    assert jaccard_2gram("night", "nacht") == 1 / 7
    assert jaccard_2gram("einstein", "einsteins") == 1.0

    gen = np.random.default_rng(29)
    recovered = 0
    for i in range(1000):
        example = random_example(gen, qid=f"q{i}", min_tokens=5, max_tokens=50)
        tokens = [t.text for t in example.context_tokens]
        ts, te = example.qa.detected_answers[0].token_span
        hit = remap_answer(tokens, tokens[ts : te + 1])
        if hit is not None and hit[2] == 2.0 and tokens[hit[0] : hit[1] + 1] == tokens[ts : te + 1]:
            recovered += 1
    assert recovered == 1000

    vocabulary = ["night", "nacht", "cat", "cot", "can", "einstein", "einsteins", "walk", "walking", "talks"]
    cases = []
    for _ in range(400):
        tokens = [vocabulary[int(gen.integers(len(vocabulary)))] for _ in range(6)]
        answer = [vocabulary[int(gen.integers(len(vocabulary)))]]
        cases.append((tokens, answer))
    counts = []
    for tau in [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8]:
        counts.append(
            sum(
                1
                for tokens, answer in cases
                if (hit := remap_answer(tokens, answer, threshold=tau)) is not None and hit[2] < 2.0
            )
        )
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    print(f"jaccard heuristic: identity recovery 1000/1000, threshold curve {counts}")


@criterion("span-selection-oracle")
def test_span_selection_oracle_1000_random_segments():
    gen = np.random.default_rng(41)
    checked = 0
    while checked < 1000:
        example = random_example(gen, qid=f"q{checked}", min_tokens=4, max_tokens=30)
        for seg in segment_example(example, max_seq_len=22, doc_stride=8, mode="literal"):
            if seg.packed_length > 40:
                continue
            packed = seg.packed_length
            start = gen.normal(size=packed)
            end = gen.normal(size=packed)
            rec = LogitsRecord(seg.segment_uid, seg.qid, start, end)
            beam = int(gen.integers(1, 8))
            max_len = int(gen.integers(1, 8))
            got = best_spans_in_segment(rec, seg, beam=beam, max_answer_len=max_len)

            ls, le = log_softmax(start), log_softmax(end)
            begin = seg.context_offset
            stop = begin + (seg.window[1] - seg.window[0])
            brute = []
            for s in range(begin, stop):
                for e in range(s, min(stop, s + max_len)):
                    brute.append((s, e, ls[s] + le[e]))
            brute.sort(key=lambda t: (-t[2], t[0], t[1]))
            assert [(c.start_pos, c.end_pos) for c in got] == [(s, e) for s, e, _ in brute[:beam]]
            checked += 1

    # adversarial: the abstain position holds the single highest logits
    example = example_from_text("a b c d e f g h")
    seg = segment_example(example, 32, 8, mode="literal")[0]
    start = np.full(seg.packed_length, -1.0)
    end = np.full(seg.packed_length, -1.0)
    start[0] = 50.0
    end[0] = 50.0
    best = best_spans_in_segment(LogitsRecord(seg.segment_uid, seg.qid, start, end), seg)
    assert best and all(c.start_pos != 0 and c.end_pos != 0 for c in best)

    # ranking is invariant to constant logit shifts
    start = gen.normal(size=seg.packed_length)
    end = gen.normal(size=seg.packed_length)
    base = best_spans_in_segment(LogitsRecord(seg.segment_uid, seg.qid, start, end), seg, beam=10)
    moved = best_spans_in_segment(
        LogitsRecord(seg.segment_uid, seg.qid, start + 99.5, end - 3.25), seg, beam=10
    )
    assert [(c.start_pos, c.end_pos) for c in base] == [(c.start_pos, c.end_pos) for c in moved]
    print(f"span selection oracle: {checked} segments matched exhaustive enumeration")


@criterion("evaluator-fixtures")
def test_evaluator_fixtures():
    assert score_question("cat sat", ["cat"]).f1 == pytest.approx(2 / 3, abs=1e-12)
    assert score_question("The Cat", ["cat"]).em == 1

    per_dataset = {
        "BioASQ": (60.28, 71.98),
        "DROP": (48.50, 58.90),
        "DuoRC": (53.29, 63.36),
        "RACE": (39.35, 53.87),
        "RelationExtraction": (79.20, 87.85),
        "TextbookQA": (56.50, 65.54),
    }
    em, f1 = macro_average(per_dataset)
    assert em == pytest.approx(56.19, abs=0.005)
    assert f1 == pytest.approx(66.92, abs=0.005)
    print(f"evaluator fixtures: macro EM {em:.4f}, macro F1 {f1:.4f}")


def _build_pipeline_workspace(root):
    """Synthetic corpus, paraphrases, and a priming run to fabricate logits."""
    from mrqakit import cli
    from mrqakit.segmenter import read_segments

    gen = np.random.default_rng(97)
    examples = []
    for i in range(1000):
        examples.append(
            random_example(gen, qid=f"q{i}", dataset=("alpha" if i % 3 else "beta"), min_tokens=20, max_tokens=180)
        )
    data = os.path.join(root, "data.jsonl.gz")
    by_dataset = {}
    for e in examples:
        by_dataset.setdefault(e.dataset, []).append(e)
    inputs = []
    for name, subset in by_dataset.items():
        path = os.path.join(root, f"{name}.jsonl.gz")
        write_dataset(subset, path)
        inputs.append(path)

    paraphrases = os.path.join(root, "paraphrases.jsonl")
    with open(paraphrases, "w", encoding="utf-8") as f:
        for e in examples:
            f.write(
                json.dumps(
                    {
                        "target_kind": "query",
                        "qid": e.qa.qid,
                        "original": e.qa.question,
                        "paraphrase": "put differently " + e.qa.question,
                    }
                )
                + "\n"
            )
    difficulty = os.path.join(root, "difficulty.jsonl")
    with open(difficulty, "w", encoding="utf-8") as f:
        for e in examples:
            f.write(json.dumps({"qid": e.qa.qid, "f1": float(gen.random())}) + "\n")

    def stages(prefix, logits_path):
        p = lambda name: os.path.join(root, f"{prefix}_{name}")
        return {
            "seed": 1234,
            "stages": [
                {"stage": "sample", "inputs": inputs, "output": p("sampled.jsonl.gz"), "default_cap": 280},
                {
                    "stage": "augment",
                    "input": p("sampled.jsonl.gz"),
                    "output": p("augmented.jsonl.gz"),
                    "paraphrases": paraphrases,
                    "difficulty": difficulty,
                    "mode": "moderate",
                    "pq": 0.3,
                    "pc": 0.0,
                },
                {
                    "stage": "segment",
                    "input": p("augmented.jsonl.gz"),
                    "output": p("segments.jsonl"),
                    "max_seq_length": 64,
                    "doc_stride": 16,
                },
                {
                    "stage": "select",
                    "segments": p("segments.jsonl"),
                    "logits": logits_path,
                    "out": p("predictions.json"),
                    "n_best": p("nbest.jsonl"),
                },
                {
                    "stage": "eval",
                    "predictions": p("predictions.json"),
                    "gold": inputs,
                    "report": p("report.json"),
                    "export_difficulty": p("difficulty_out.jsonl"),
                },
            ],
        }

    # priming pass: produce the segments file once so logits can reference it
    priming = {"seed": 1234, "stages": stages("prime", "unused")["stages"][:3]}
    cfg = os.path.join(root, "prime.json")
    with open(cfg, "w", encoding="utf-8") as f:
        json.dump(priming, f)
    assert cli.main(["pipeline", cfg]) == 0

    logits = os.path.join(root, "logits.jsonl")
    with open(logits, "w", encoding="utf-8") as f:
        for seg in read_segments(os.path.join(root, "prime_segments.jsonl")):
            packed = seg.packed_length
            lgen = np.random.default_rng(abs(hash(seg.segment_uid)) % (2**32))
            start = lgen.normal(size=packed)
            end = lgen.normal(size=packed)
            if seg.label.kind == "span":
                start[seg.label.start] += 8.0
                end[seg.label.end] += 8.0
            f.write(
                json.dumps(
                    {
                        "segment_uid": seg.segment_uid,
                        "qid": seg.qid,
                        "start_logits": [round(x, 5) for x in start],
                        "end_logits": [round(x, 5) for x in end],
                        "abstain_index": 0,
                    }
                )
                + "\n"
            )
    return stages, logits


@criterion("pipeline-determinism")
def test_pipeline_runs_are_byte_identical(tmp_path):
    from mrqakit import cli

    root = str(tmp_path)
    stages, logits = _build_pipeline_workspace(root)
    outputs = {}
    for run in ("run1", "run2"):
        cfg_path = os.path.join(root, f"{run}.json")
        with open(cfg_path, "w", encoding="utf-8") as f:
            json.dump(stages(run, logits), f)
        assert cli.main(["pipeline", cfg_path]) == 0
        outputs[run] = sorted(
            path for path in glob.glob(os.path.join(root, f"{run}_*")) if os.path.isfile(path)
        )
    assert len(outputs["run1"]) == 7
    for a, b in zip(outputs["run1"], outputs["run2"]):
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read(), f"outputs differ: {a} vs {b}"
    print(f"pipeline determinism: {len(outputs['run1'])} output files byte-identical across runs")


@criterion("segmentation-throughput")
def test_segmentation_throughput_100k_examples():
    gen = np.random.default_rng(53)
    n = 100_000
    lengths = gen.integers(400, 1201, size=n).astype(np.int64)  # mean 800
    question_lens = gen.integers(5, 21, size=n).astype(np.int64)
    widths = (512 - question_lens - 3).astype(np.int64)
    ans_starts = np.empty(n, np.int64)
    ans_ends = np.empty(n, np.int64)
    for i in range(n):
        start = int(gen.integers(0, lengths[i]))
        ans_starts[i] = start
        ans_ends[i] = min(start + int(gen.integers(0, 4)), lengths[i] - 1)
    offsets = np.arange(n + 1, dtype=np.int64)

    # warm the JIT outside the timed region
    _kernels.count_windows_na(lengths[:8], widths[:8], 128, ans_starts[:8], ans_ends[:8], offsets[:9])

    started = time.perf_counter()
    total, n_na = _kernels.count_windows_na(lengths, widths, 128, ans_starts, ans_ends, offsets)
    elapsed = time.perf_counter() - started
    rate = n / elapsed

    # the full object path, measured on a slice and reported alongside
    sample = [
        random_example(gen, qid=f"t{i}", min_tokens=700, max_tokens=900) for i in range(500)
    ]
    started_obj = time.perf_counter()
    n_segments = sum(len(segment_example(e, 512, 128)) for e in sample)
    object_rate = len(sample) / (time.perf_counter() - started_obj)

    print(
        f"segmentation throughput: {n} examples -> {int(total)} windows ({int(n_na)} NA) "
        f"in {elapsed:.2f}s ({rate:,.0f} examples/s batched; "
        f"object path {object_rate:,.0f} examples/s over {n_segments} segments; "
        f"numba={'on' if _kernels.USING_NUMBA else 'off'})"
    )
    assert elapsed < 60.0


@criterion("desk-scale-statement")
def test_desk_scale_exclusions_are_documented():
    """Training-dependent results are out of reach here by design: fine-tuned
    EM/F1 deltas, the fine-tuning transfer heatmap, and leaderboard numbers
    all need GPU training of large LMs. The README must say so."""
    readme = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "README.md")
    with open(readme, encoding="utf-8") as f:
        text = f.read().lower()
    assert "not reproducible at desk scale" in text
    for phrase in ("fine-tun", "leaderboard", "gpu"):
        assert phrase in text, f"README missing {phrase!r} in the desk-scale statement"
    print("desk-scale statement: README documents the excluded training-dependent results")
