"""Shared builders for synthetic datasets."""

from __future__ import annotations

import numpy as np
import pytest

from mrqakit.augment import whitespace_tokens
from mrqakit.records import QA, DetectedAnswer, Example


def example_from_text(
    context: str,
    question: str = "what is it",
    qid: str = "q0",
    dataset: str = "synth",
    answer_token_spans: list[tuple[int, int]] | None = None,
    gold_answers: list[str] | None = None,
) -> Example:
    """Builds a valid Example from whitespace-tokenized text.

    answer_token_spans are inclusive token index pairs into the context.
    """
    tokens = whitespace_tokens(context)
    spans = answer_token_spans or [(0, 0)]
    answers = []
    for ts, te in spans:
        cs = tokens[ts].char_start
        ce = tokens[te].char_start + len(tokens[te].text) - 1
        answers.append(
            DetectedAnswer(text=context[cs : ce + 1], token_span=(ts, te), char_span=(cs, ce))
        )
    return Example(
        dataset=dataset,
        context=context,
        context_tokens=tokens,
        qa=QA(
            qid=qid,
            question=question,
            question_tokens=whitespace_tokens(question),
            detected_answers=answers,
            gold_answers=gold_answers or list(dict.fromkeys(a.text for a in answers)),
        ),
    )


def random_example(
    rng: np.random.Generator,
    qid: str,
    dataset: str = "synth",
    min_tokens: int = 4,
    max_tokens: int = 60,
    n_answers: int = 1,
    max_answer_len: int = 3,
) -> Example:
    n = int(rng.integers(min_tokens, max_tokens + 1))
    words = [f"w{int(rng.integers(0, 200))}" for _ in range(n)]
    context = " ".join(words)
    spans = []
    for _ in range(n_answers):
        length = int(rng.integers(1, max_answer_len + 1))
        start = int(rng.integers(0, n - length + 1))
        spans.append((start, start + length - 1))
    q_len = int(rng.integers(2, 9))
    question = " ".join(f"q{int(rng.integers(0, 50))}" for _ in range(q_len))
    return example_from_text(
        context, question=question, qid=qid, dataset=dataset, answer_token_spans=spans
    )


def brute_force_windows(context_len: int, window_len: int, stride: int) -> list[tuple[int, int]]:
    """Independent enumeration: lowest k whose window reaches the end, by
    stepping k upward one at a time."""
    k = 0
    while k * stride + window_len < context_len:
        k += 1
    return [(i * stride, min(i * stride + window_len, context_len)) for i in range(k + 1)]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260809)
