"""Inference-time span selection over external model logits.

Each segment's start/end logits are normalized to log-probabilities
independently (so scores are comparable across segments), candidate
(start, end) pairs are enumerated within the context region with the
abstain position excluded, and the best span per question is the highest
scorer across all of its segments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from . import _kernels
from .dataset_io import DatasetFormatError, open_input, open_output
from .segmenter import Segment

DEFAULT_BEAM = 5
DEFAULT_MAX_ANSWER_LEN = 30


@dataclass
class LogitsRecord:
    segment_uid: str
    qid: str
    start_logits: np.ndarray
    end_logits: np.ndarray
    abstain_index: int = 0


@dataclass(frozen=True)
class SpanCandidate:
    segment_uid: str
    start_pos: int  # packed positions
    end_pos: int
    score: float
    text: str  # exact substring of the original context
    window_start: int  # window token start, for deterministic tie-breaking


@dataclass
class Prediction:
    qid: str
    text: str
    score: float
    n_best: list[SpanCandidate] = field(default_factory=list)


def _reject_constant(value: str):
    raise ValueError(f"non-finite number {value!r}")


def read_logits(path: str) -> Iterator[LogitsRecord]:
    """Streams logits records, rejecting NaN/Inf values with line numbers."""
    with open_input(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line, parse_constant=_reject_constant)
            except (json.JSONDecodeError, ValueError) as exc:
                raise DatasetFormatError(f"malformed logits record: {exc}", path, line_no) from exc
            for key in ("segment_uid", "qid", "start_logits", "end_logits"):
                if key not in record:
                    raise DatasetFormatError(f"missing required field {key!r}", path, line_no)
            start = np.asarray(record["start_logits"], np.float64)
            end = np.asarray(record["end_logits"], np.float64)
            if not (np.all(np.isfinite(start)) and np.all(np.isfinite(end))):
                raise DatasetFormatError("logits must be finite", path, line_no)
            if start.shape != end.shape or start.ndim != 1:
                raise DatasetFormatError("start_logits and end_logits must be equal-length lists", path, line_no)
            abstain = int(record.get("abstain_index", 0))
            if not 0 <= abstain < start.shape[0]:
                raise DatasetFormatError(f"abstain_index {abstain} out of range", path, line_no)
            yield LogitsRecord(
                segment_uid=str(record["segment_uid"]),
                qid=str(record["qid"]),
                start_logits=start,
                end_logits=end,
                abstain_index=abstain,
            )


def log_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x)
    return shifted - math.log(float(np.sum(np.exp(shifted))))


def best_spans_in_segment(
    rec: LogitsRecord,
    seg: Segment,
    beam: int = DEFAULT_BEAM,
    max_answer_len: int = DEFAULT_MAX_ANSWER_LEN,
    raw_scores: bool = False,
) -> list[SpanCandidate]:
    """Top-beam candidate spans inside one segment's context region.

    Scores are log-softmaxed start/end logits summed (raw logit sums
    behind raw_scores). The sentinel/abstain position and all question
    positions are never candidates.
    """
    if rec.segment_uid != seg.segment_uid:
        raise ValueError(f"logits for {rec.segment_uid!r} applied to segment {seg.segment_uid!r}")
    if beam < 1:
        raise ValueError("beam must be >= 1")
    if max_answer_len < 1:
        raise ValueError("max_answer_len must be >= 1")
    packed = seg.packed_length
    if rec.start_logits.shape[0] != packed:
        raise ValueError(
            f"segment {seg.segment_uid!r}: logits length {rec.start_logits.shape[0]} "
            f"does not match packed length {packed}"
        )
    if raw_scores:
        start_scores, end_scores = rec.start_logits, rec.end_logits
    else:
        start_scores = log_softmax(rec.start_logits)
        end_scores = log_softmax(rec.end_logits)

    ctx_begin = seg.context_offset
    ctx_end = ctx_begin + (seg.window[1] - seg.window[0])
    starts, ends, scores = _kernels.span_topk(
        np.ascontiguousarray(start_scores),
        np.ascontiguousarray(end_scores),
        ctx_begin,
        ctx_end,
        rec.abstain_index,
        max_answer_len,
        beam,
    )

    tokens = seg.context_window_tokens
    base = seg.window_char_start
    out = []
    for s, e, sc in zip(starts, ends, scores):
        tok_s = tokens[int(s) - ctx_begin]
        tok_e = tokens[int(e) - ctx_begin]
        text = seg.window_text[tok_s.char_start - base : tok_e.char_start + len(tok_e.text) - base]
        out.append(
            SpanCandidate(
                segment_uid=seg.segment_uid,
                start_pos=int(s),
                end_pos=int(e),
                score=float(sc),
                text=text,
                window_start=seg.window[0],
            )
        )
    return out


def aggregate_example(qid: str, candidates: list[SpanCandidate], beam: int = DEFAULT_BEAM) -> Prediction:
    """Best span for one question across all of its segments.

    Candidates are ranked by score with ties broken by (window start,
    start position); the n-best list is deduplicated by answer text.
    """
    if not candidates:
        raise ValueError(f"no candidates for qid {qid!r}: segments and logits are out of step")
    ranked = sorted(candidates, key=lambda c: (-c.score, c.window_start, c.start_pos, c.end_pos))
    n_best: list[SpanCandidate] = []
    seen: set[str] = set()
    for cand in ranked:
        if cand.text in seen:
            continue
        seen.add(cand.text)
        n_best.append(cand)
        if len(n_best) == beam:
            break
    return Prediction(qid=qid, text=n_best[0].text, score=n_best[0].score, n_best=n_best)


def select_predictions(
    segments: Mapping[str, Segment],
    logits: Iterable[LogitsRecord],
    beam: int = DEFAULT_BEAM,
    max_answer_len: int = DEFAULT_MAX_ANSWER_LEN,
    raw_scores: bool = False,
) -> list[Prediction]:
    """Runs per-segment scoring and per-question aggregation end to end."""
    by_qid: dict[str, list[SpanCandidate]] = {}
    for rec in logits:
        seg = segments.get(rec.segment_uid)
        if seg is None:
            raise ValueError(f"logits reference unknown segment {rec.segment_uid!r}")
        by_qid.setdefault(rec.qid, []).extend(
            best_spans_in_segment(rec, seg, beam, max_answer_len, raw_scores)
        )
    return [aggregate_example(qid, cands, beam) for qid, cands in by_qid.items()]


def emit_predictions(
    predictions: Iterable[Prediction],
    path: str,
    n_best_path: str | None = None,
) -> int:
    """Writes the {qid: answer text} predictions object (and optionally an
    n-best JSONL sidecar). Duplicate qids are an error."""
    by_qid: dict[str, Prediction] = {}
    for pred in predictions:
        if pred.qid in by_qid:
            raise ValueError(f"duplicate prediction for qid {pred.qid!r}")
        by_qid[pred.qid] = pred

    ordered = dict(sorted((qid, p.text) for qid, p in by_qid.items()))
    with open_output(path) as f:
        f.write(json.dumps(ordered, ensure_ascii=False, indent=2) + "\n")

    if n_best_path is not None:
        with open_output(n_best_path) as f:
            for qid in sorted(by_qid):
                pred = by_qid[qid]
                f.write(
                    json.dumps(
                        {
                            "qid": qid,
                            "n_best": [
                                {
                                    "text": c.text,
                                    "score": c.score,
                                    "segment_uid": c.segment_uid,
                                    "start_pos": c.start_pos,
                                    "end_pos": c.end_pos,
                                }
                                for c in pred.n_best
                            ],
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    return len(by_qid)


def read_predictions(path: str) -> dict[str, str]:
    with open_input(path) as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise DatasetFormatError("predictions file must be a single {qid: text} object", path)
    return {str(k): str(v) for k, v in data.items()}
