"""Exact-match and token-F1 scoring with per-dataset and macro aggregates.

Text normalization follows the shared-task scorer convention bit for bit:
lowercase, strip punctuation, drop the articles a/an/the, collapse
whitespace. F1 is the harmonic mean of token-multiset precision/recall,
maximized over the gold answers. The macro-average is the unweighted mean
over datasets, independent of dataset sizes.
"""

from __future__ import annotations

import json
import re
import string
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .dataset_io import open_output
from .records import Example
from .sampling import write_difficulty

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)


@dataclass(frozen=True)
class QuestionScore:
    qid: str
    em: int  # 0 or 1
    f1: float  # in [0, 1]
    dataset: str = ""


@dataclass
class EvalReport:
    per_question: list[QuestionScore]
    per_dataset: dict[str, tuple[float, float]]  # dataset -> (EM*100, F1*100), exact
    macro: tuple[float, float]
    missing_predictions: int = 0
    unknown_predictions: int = 0


def normalize_text(s: str) -> str:
    s = s.lower()
    s = "".join(ch for ch in s if ch not in _PUNCT)
    s = _ARTICLES.sub(" ", s)
    return " ".join(s.split())


def _token_f1(pred_tokens: Sequence[str], gold_tokens: Sequence[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def score_question(pred: str, golds: Sequence[str], qid: str = "", dataset: str = "") -> QuestionScore:
    """EM and token F1 of a prediction, maximized over gold strings."""
    if not golds:
        raise ValueError(f"no gold answers for qid {qid!r}")
    pred_norm = normalize_text(pred)
    pred_tokens = pred_norm.split()
    em = 0
    f1 = 0.0
    for gold in golds:
        gold_norm = normalize_text(gold)
        if pred_norm == gold_norm:
            em = 1
        f1 = max(f1, _token_f1(pred_tokens, gold_norm.split()))
    return QuestionScore(qid=qid, em=em, f1=f1, dataset=dataset)


def macro_average(per_dataset: Mapping[str, tuple[float, float]]) -> tuple[float, float]:
    """Unweighted mean of per-dataset (EM, F1) pairs."""
    if not per_dataset:
        return (0.0, 0.0)
    n = len(per_dataset)
    return (
        sum(em for em, _ in per_dataset.values()) / n,
        sum(f1 for _, f1 in per_dataset.values()) / n,
    )


def evaluate(predictions: Mapping[str, str], gold_examples: Iterable[Example]) -> EvalReport:
    """Scores predictions against gold examples.

    Gold questions without a prediction score zero (counted, not fatal);
    predictions for unknown qids are counted and ignored.
    """
    per_question: list[QuestionScore] = []
    sums: dict[str, list[float]] = {}  # dataset -> [em_sum, f1_sum, count]
    gold_qids: set[str] = set()
    missing = 0
    for example in gold_examples:
        qid = example.qa.qid
        gold_qids.add(qid)
        pred = predictions.get(qid)
        if pred is None:
            missing += 1
            qs = QuestionScore(qid=qid, em=0, f1=0.0, dataset=example.dataset)
        else:
            qs = score_question(pred, example.qa.gold_answers, qid, example.dataset)
        per_question.append(qs)
        bucket = sums.setdefault(example.dataset, [0.0, 0.0, 0])
        bucket[0] += qs.em
        bucket[1] += qs.f1
        bucket[2] += 1

    unknown = sum(1 for qid in predictions if qid not in gold_qids)
    per_dataset = {
        ds: (100.0 * em_sum / count, 100.0 * f1_sum / count)
        for ds, (em_sum, f1_sum, count) in sums.items()
    }
    return EvalReport(
        per_question=per_question,
        per_dataset=per_dataset,
        macro=macro_average(per_dataset),
        missing_predictions=missing,
        unknown_predictions=unknown,
    )


def format_report(report: EvalReport) -> str:
    """Human-readable table: one dataset per row plus the macro-average."""
    rows = [("Dataset", "EM", "F1")]
    for ds in sorted(report.per_dataset):
        em, f1 = report.per_dataset[ds]
        rows.append((ds, f"{em:.2f}", f"{f1:.2f}"))
    rows.append(("Macro-Average", f"{report.macro[0]:.2f}", f"{report.macro[1]:.2f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    for i, row in enumerate(rows):
        lines.append(
            f"{row[0]:<{widths[0]}}  {row[1]:>{widths[1]}}  {row[2]:>{widths[2]}}"
        )
        if i == 0 or i == len(rows) - 2:
            lines.append("-" * (sum(widths) + 4))
    if report.missing_predictions:
        lines.append(f"missing predictions: {report.missing_predictions}")
    if report.unknown_predictions:
        lines.append(f"unknown predictions ignored: {report.unknown_predictions}")
    return "\n".join(lines)


def report_to_json(report: EvalReport) -> dict:
    """Machine-readable report with exact (unrounded) values."""
    return {
        "per_question": [
            {"qid": q.qid, "dataset": q.dataset, "em": q.em, "f1": q.f1}
            for q in report.per_question
        ],
        "per_dataset": {ds: {"em": em, "f1": f1} for ds, (em, f1) in sorted(report.per_dataset.items())},
        "macro": {"em": report.macro[0], "f1": report.macro[1]},
        "missing_predictions": report.missing_predictions,
        "unknown_predictions": report.unknown_predictions,
    }


def write_report(report: EvalReport, path: str) -> None:
    with open_output(path) as f:
        f.write(json.dumps(report_to_json(report), ensure_ascii=False, indent=2) + "\n")


def export_difficulty(report: EvalReport, path: str) -> None:
    """Per-question F1 table consumable by the weighted sampler."""
    write_difficulty({q.qid: q.f1 for q in report.per_question}, path)
