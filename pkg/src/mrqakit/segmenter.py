"""Sliding-window segmentation of examples into model-sized units.

A context longer than the window budget becomes several overlapping
windows stepped by the document stride. Each window is labeled either
with the packed positions of a fully contained detected answer or with
the abstain label (both endpoints at the leading sentinel, position 0),
which lets a model decline to answer in that window.

Packed layout per segment: [sentinel] question [sep] context-chunk [sep],
so the first context token sits at packed position len(question) + 2 and
packed_length = len(question) + chunk + 3.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from . import _kernels
from .dataset_io import DatasetFormatError, open_input, open_output
from .records import DatasetStats, Example, Token

SPECIAL_BUDGET = 3  # leading sentinel + two separators
ABSTAIN_INDEX = 0

LABEL_SPAN = "span"
LABEL_NO_ANSWER = "no_answer"


@dataclass(frozen=True)
class WindowPlan:
    windows: list[tuple[int, int]]  # half-open token ranges
    window_len: int
    stride: int
    k: int  # highest window index


@dataclass(frozen=True)
class SegmentLabel:
    kind: str  # LABEL_SPAN or LABEL_NO_ANSWER
    start: int  # packed positions; both ABSTAIN_INDEX for no_answer
    end: int

    @staticmethod
    def no_answer() -> "SegmentLabel":
        return SegmentLabel(LABEL_NO_ANSWER, ABSTAIN_INDEX, ABSTAIN_INDEX)

    @staticmethod
    def span(start: int, end: int) -> "SegmentLabel":
        return SegmentLabel(LABEL_SPAN, start, end)


@dataclass
class Segment:
    segment_uid: str
    example_uid: str
    qid: str
    dataset: str
    window_index: int
    window: tuple[int, int]
    label: SegmentLabel
    question_tokens: list[Token]
    context_window_tokens: list[Token]  # original-context char offsets preserved
    window_text: str  # raw substring of the original context covering the window
    window_char_start: int

    @property
    def context_offset(self) -> int:
        """Packed position of the first context token."""
        return len(self.question_tokens) + 2

    @property
    def packed_length(self) -> int:
        return len(self.question_tokens) + (self.window[1] - self.window[0]) + SPECIAL_BUDGET


def plan_windows(context_len: int, window_len: int, stride: int) -> WindowPlan:
    """Overlapping half-open windows [i*stride, i*stride + window_len) over
    [0, context_len), clipped at the end; one window when the context fits."""
    if window_len < 1:
        raise ValueError("window length must be >= 1")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if stride > window_len:
        raise ValueError("stride exceeds window (coverage gap)")
    if context_len < 1:
        raise ValueError("context length must be >= 1")
    if context_len <= window_len:
        k = 0
    else:
        k = -(-(context_len - window_len) // stride)  # smallest k with k*stride + window_len >= L
    windows = [(i * stride, min(i * stride + window_len, context_len)) for i in range(k + 1)]
    return WindowPlan(windows=windows, window_len=window_len, stride=stride, k=k)


def effective_window(
    max_seq_len: int,
    question_len: int = 0,
    special_budget: int = SPECIAL_BUDGET,
    mode: str = "model_budget",
) -> int:
    """Context-token budget per window.

    literal: the window is max_seq_len tokens of context, read verbatim.
    model_budget: question and special tokens share the budget, so the
    window shrinks to max_seq_len - question_len - special_budget.
    """
    if mode == "literal":
        return max_seq_len
    if mode != "model_budget":
        raise ValueError(f"unknown window mode {mode!r}")
    width = max_seq_len - question_len - special_budget
    if width < 1:
        raise ValueError("question exhausts sequence budget")
    return width


def used_question_tokens(example: Example, max_seq_len: int, mode: str) -> list[Token]:
    """Question tokens as packed, truncated to half the budget if oversized."""
    tokens = example.qa.question_tokens
    if mode == "model_budget" and len(tokens) > max_seq_len // 2:
        return tokens[: max_seq_len // 2]
    return tokens


def _retained_answers(example: Example, answers_per_example: str):
    answers = example.qa.detected_answers
    if answers_per_example == "one":
        return [min(answers, key=lambda a: a.token_span)]
    if answers_per_example != "all":
        raise ValueError(f"answers_per_example must be 'one' or 'all', got {answers_per_example!r}")
    return list(answers)


def segment_example(
    example: Example,
    max_seq_len: int = 512,
    doc_stride: int = 128,
    mode: str = "model_budget",
    include_negatives: bool = True,
    answers_per_example: str = "all",
) -> list[Segment]:
    """Windows an example and labels each window.

    A window gets a span label iff a retained detected answer is fully
    inside it (a truncated span cannot be an extraction target); otherwise
    the abstain label. With include_negatives=False abstain windows are
    dropped.
    """
    question = used_question_tokens(example, max_seq_len, mode)
    width = effective_window(max_seq_len, len(question), SPECIAL_BUDGET, mode)
    plan = plan_windows(len(example.context_tokens), width, doc_stride)
    answers = sorted(_retained_answers(example, answers_per_example), key=lambda a: a.token_span)
    context = example.context
    tokens = example.context_tokens
    ctx_offset = len(question) + 2

    segments: list[Segment] = []
    uid = example.example_uid
    for index, (w_start, w_end) in enumerate(plan.windows):
        label = SegmentLabel.no_answer()
        for ans in answers:
            a_start, a_end = ans.token_span
            if a_start >= w_start and a_end < w_end:
                label = SegmentLabel.span(
                    a_start - w_start + ctx_offset, a_end - w_start + ctx_offset
                )
                break
        if label.kind == LABEL_NO_ANSWER and not include_negatives:
            continue
        window_tokens = tokens[w_start:w_end]
        char_start = window_tokens[0].char_start
        last = window_tokens[-1]
        char_end = last.char_start + len(last.text)
        segments.append(
            Segment(
                segment_uid=f"{uid}#{index}",
                example_uid=uid,
                qid=example.qa.qid,
                dataset=example.dataset,
                window_index=index,
                window=(w_start, w_end),
                label=label,
                question_tokens=question,
                context_window_tokens=window_tokens,
                window_text=context[char_start:char_end],
                window_char_start=char_start,
            )
        )
    return segments


def dataset_stats(
    examples: Iterable[Example],
    max_seq_len: int = 512,
    doc_stride: int = 128,
    mode: str = "model_budget",
) -> list[DatasetStats]:
    """Example/segment/no-answer counts per dataset.

    Counted with every detected answer retained and negatives included;
    only window geometry and answer spans matter, so the work runs as a
    batched kernel over integer arrays.
    """
    lengths: dict[str, list[int]] = {}
    widths: dict[str, list[int]] = {}
    span_starts: dict[str, list[int]] = {}
    span_ends: dict[str, list[int]] = {}
    span_offsets: dict[str, list[int]] = {}

    for example in examples:
        ds = example.dataset
        if ds not in lengths:
            lengths[ds] = []
            widths[ds] = []
            span_starts[ds] = []
            span_ends[ds] = []
            span_offsets[ds] = [0]
        question = used_question_tokens(example, max_seq_len, mode)
        lengths[ds].append(len(example.context_tokens))
        widths[ds].append(effective_window(max_seq_len, len(question), SPECIAL_BUDGET, mode))
        for ans in example.qa.detected_answers:
            span_starts[ds].append(ans.token_span[0])
            span_ends[ds].append(ans.token_span[1])
        span_offsets[ds].append(len(span_starts[ds]))

    out = []
    for ds in lengths:
        total, n_na = _kernels.count_windows_na(
            np.asarray(lengths[ds], np.int64),
            np.asarray(widths[ds], np.int64),
            doc_stride,
            np.asarray(span_starts[ds], np.int64),
            np.asarray(span_ends[ds], np.int64),
            np.asarray(span_offsets[ds], np.int64),
        )
        out.append(
            DatasetStats(
                dataset=ds,
                n_examples=len(lengths[ds]),
                n_segments=int(total),
                na_fraction=(n_na / total) if total else 0.0,
            )
        )
    return out


def segment_to_record(seg: Segment) -> dict:
    return {
        "segment_uid": seg.segment_uid,
        "example_uid": seg.example_uid,
        "qid": seg.qid,
        "dataset": seg.dataset,
        "window_index": seg.window_index,
        "window_token_start": seg.window[0],
        "window_token_end": seg.window[1],
        "label_kind": seg.label.kind,
        "label_start": seg.label.start,
        "label_end": seg.label.end,
        "question_tokens": [[t.text, t.char_start] for t in seg.question_tokens],
        "context_window_tokens": [[t.text, t.char_start] for t in seg.context_window_tokens],
        "window_text": seg.window_text,
        "window_char_start": seg.window_char_start,
    }


def record_to_segment(record: dict) -> Segment:
    kind = record["label_kind"]
    if kind not in (LABEL_SPAN, LABEL_NO_ANSWER):
        raise ValueError(f"unknown label_kind {kind!r}")
    return Segment(
        segment_uid=record["segment_uid"],
        example_uid=record["example_uid"],
        qid=record["qid"],
        dataset=record["dataset"],
        window_index=int(record["window_index"]),
        window=(int(record["window_token_start"]), int(record["window_token_end"])),
        label=SegmentLabel(kind, int(record["label_start"]), int(record["label_end"])),
        question_tokens=[Token(t, int(s)) for t, s in record["question_tokens"]],
        context_window_tokens=[Token(t, int(s)) for t, s in record["context_window_tokens"]],
        window_text=record["window_text"],
        window_char_start=int(record["window_char_start"]),
    )


def write_segments(segments: Iterable[Segment], path: str) -> int:
    count = 0
    with open_output(path) as f:
        for seg in segments:
            f.write(json.dumps(segment_to_record(seg), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_segments(path: str) -> Iterator[Segment]:
    with open_input(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"malformed segment record: {exc}", path, line_no) from exc
            yield record_to_segment(record)
