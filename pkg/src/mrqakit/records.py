"""Core record types for question-context datasets.

An Example is one flattened (question, context) pair. Token offsets index
into the raw context (or question) string, so slicing by offsets always
reproduces the token text exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple


class Token(NamedTuple):
    text: str
    char_start: int


@dataclass(frozen=True)
class DetectedAnswer:
    """One located occurrence of a gold answer. Both spans are inclusive."""

    text: str
    token_span: tuple[int, int]
    char_span: tuple[int, int]


@dataclass
class QA:
    qid: str
    question: str
    question_tokens: list[Token]
    detected_answers: list[DetectedAnswer]
    gold_answers: list[str]


@dataclass
class Example:
    dataset: str
    context: str
    context_tokens: list[Token]
    qa: QA

    @property
    def example_uid(self) -> str:
        return f"{self.dataset}:{self.qa.qid}"


@dataclass
class DatasetStats:
    dataset: str
    n_examples: int
    n_segments: int
    na_fraction: float


def _check_tokens(tokens: list[Token], source: str, name: str, out: list[str]) -> None:
    prev_start = -1
    for i, tok in enumerate(tokens):
        if not tok.text:
            out.append(f"{name}[{i}]: empty token text")
        if tok.char_start < 0:
            out.append(f"{name}[{i}]: negative char_start {tok.char_start}")
        if tok.char_start <= prev_start:
            out.append(f"{name}: tokens not monotonic at index {i}")
        prev_start = tok.char_start
        end = tok.char_start + len(tok.text)
        if source[tok.char_start:end] != tok.text:
            out.append(
                f"{name}[{i}]: text {tok.text!r} does not match source at "
                f"[{tok.char_start}, {end})"
            )


def validate_example(example: Example) -> list[str]:
    """Returns human-readable invariant violations; empty list means valid."""
    violations: list[str] = []
    qa = example.qa

    if not qa.qid:
        violations.append("qid: empty")
    if not example.dataset:
        violations.append("dataset: empty")
    if not qa.detected_answers:
        violations.append("detected_answers: empty")
    if not qa.gold_answers:
        violations.append("gold_answers: empty")

    _check_tokens(example.context_tokens, example.context, "context_tokens", violations)
    _check_tokens(qa.question_tokens, qa.question, "question_tokens", violations)

    n_tokens = len(example.context_tokens)
    for i, ans in enumerate(qa.detected_answers):
        ts, te = ans.token_span
        cs, ce = ans.char_span
        if ts > te:
            violations.append(f"detected_answers[{i}].token_span: start {ts} > end {te}")
        if cs > ce:
            violations.append(f"detected_answers[{i}].char_span: start {cs} > end {ce}")
        if ts < 0 or te >= n_tokens:
            violations.append(
                f"detected_answers[{i}].token_span: [{ts}, {te}] outside "
                f"{n_tokens} context tokens"
            )
        elif example.context[cs : ce + 1] != ans.text:
            violations.append(
                f"detected_answers[{i}].char_span: context[{cs}:{ce + 1}] != answer text "
                f"{ans.text!r}"
            )
    return violations
