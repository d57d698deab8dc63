"""Merging back-translated paraphrases into a dataset.

Query paraphrases swap the question text; context paraphrases swap whole
sentences, which moves or destroys answer spans. Spans are recovered by
exact token-sequence match first, then by a fuzzy alignment: every token
of the paraphrased sentence is compared to the answer's first and last
token by Jaccard similarity over character 2-gram sets, and the best
(start, end) pair above a threshold wins. Augmented copies whose answers
cannot be recovered are discarded; originals always pass through.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .dataset_io import DatasetFormatError, open_input
from .records import QA, DetectedAnswer, Example, Token
from .rng import keyed_unit
from .sampling import EPSILON, normalize, score, weighted_sample

TARGET_QUERY = "query"
TARGET_CONTEXT_SENTENCE = "context_sentence"

_WORD = re.compile(r"\S+")
_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class ParaphraseRecord:
    target_kind: str  # TARGET_QUERY or TARGET_CONTEXT_SENTENCE
    original: str
    paraphrase: str
    qid: str = ""  # query targets
    example_uid: str = ""  # context-sentence targets
    sentence_index: int = -1


@dataclass
class ParaphraseSet:
    query: dict[str, ParaphraseRecord] = field(default_factory=dict)  # by qid
    context: dict[str, dict[int, ParaphraseRecord]] = field(default_factory=dict)
    empty_skipped: int = 0  # empty decodes keep the original, so carry no record


@dataclass
class AugmentConfig:
    p_query: float = 0.2
    p_context: float = 0.4
    mode: str = "random"
    jaccard_threshold: float = 0.8
    max_span_slack: int = 5
    seed: int = 0
    epsilon: float = EPSILON

    def __post_init__(self):
        if not 0.0 <= self.p_query <= 1.0:
            raise ValueError(f"p_query must be in [0, 1], got {self.p_query}")
        if not 0.0 <= self.p_context <= 1.0:
            raise ValueError(f"p_context must be in [0, 1], got {self.p_context}")


@dataclass
class AugmentStats:
    n_input: int = 0
    n_augmented: int = 0
    missing_paraphrase: int = 0  # example chosen but no paraphrase on file
    unknown_targets: int = 0  # paraphrase records pointing outside the dataset
    unaligned: int = 0  # sentence sidecar does not match the context
    dropped_no_answer: int = 0  # every answer lost in remapping


def char_bigrams(token: str) -> set[str]:
    """Adjacent character pairs; a single character is its own 1-gram set."""
    if len(token) < 2:
        return {token}
    return {token[i : i + 2] for i in range(len(token) - 1)}


def jaccard_2gram(a: str, b: str) -> float:
    """Jaccard similarity of the character-2-gram sets of two tokens."""
    if not a or not b:
        raise ValueError("jaccard_2gram requires non-empty tokens")
    ga = char_bigrams(a)
    gb = char_bigrams(b)
    return len(ga & gb) / len(ga | gb)


def remap_answer(
    paraphrase_tokens: Sequence[str],
    answer_tokens: Sequence[str],
    threshold: float = 0.8,
    max_span_slack: int = 5,
) -> tuple[int, int, float] | None:
    """Locates the answer in a paraphrased sentence.

    Exact (case-sensitive) token-sequence match wins immediately with
    score 2.0. Otherwise each paraphrase token is scored against the
    answer's first and last token by case-folded 2-gram Jaccard, and the
    best start/end pair with combined score >= threshold is returned,
    provided the span is no longer than the answer plus max_span_slack.
    Returns (start_index, end_index, combined_score) or None.
    """
    if not paraphrase_tokens or not answer_tokens:
        raise ValueError("remap_answer requires non-empty token sequences")

    n = len(paraphrase_tokens)
    m = len(answer_tokens)
    for i in range(n - m + 1):
        if list(paraphrase_tokens[i : i + m]) == list(answer_tokens):
            return (i, i + m - 1, 2.0)

    first = answer_tokens[0].casefold()
    last = answer_tokens[-1].casefold()
    folded = [t.casefold() for t in paraphrase_tokens]
    start_scores = [jaccard_2gram(t, first) if t else 0.0 for t in folded]
    end_scores = [jaccard_2gram(t, last) if t else 0.0 for t in folded]

    best: tuple[int, int, float] | None = None
    max_len = m + max_span_slack
    for i in range(n):
        j_stop = min(n, i + max_len)
        for j in range(i, j_stop):
            combined = start_scores[i] + end_scores[j]
            if best is None or combined > best[2]:
                best = (i, j, combined)
    if best is not None and best[2] >= threshold:
        return best
    return None


def whitespace_tokens(text: str, offset: int = 0) -> list[Token]:
    return [Token(m.group(), m.start() + offset) for m in _WORD.finditer(text)]


def split_sentences(text: str) -> list[str]:
    """Crude {.!?}+space splitter; a stand-in for a real sentence segmenter,
    meant for synthetic data only."""
    return [s for s in _SENTENCE_BREAK.split(text) if s.strip()]


def align_sentences(context: str, sentences: Sequence[str]) -> list[tuple[int, int]] | None:
    """Char range of each sentence in the raw context, or None.

    Sentences are matched in order, tolerating whitespace-run differences
    (the sidecar may be whitespace-normalized); together they must cover
    the whole context up to surrounding whitespace.
    """
    ranges: list[tuple[int, int]] = []
    pos = 0
    n = len(context)
    for raw in sentences:
        sent = raw.strip()
        if not sent:
            return None
        while pos < n and context[pos].isspace():
            pos += 1
        start = pos
        i = 0
        m = len(sent)
        while i < m:
            if sent[i].isspace():
                while i < m and sent[i].isspace():
                    i += 1
                if pos >= n or not context[pos].isspace():
                    return None
                while pos < n and context[pos].isspace():
                    pos += 1
            else:
                if pos >= n or context[pos] != sent[i]:
                    return None
                pos += 1
                i += 1
        ranges.append((start, pos))
    while pos < n and context[pos].isspace():
        pos += 1
    if pos != n:
        return None
    return ranges


def sentence_token_ranges(
    tokens: Sequence[Token], char_ranges: Sequence[tuple[int, int]]
) -> list[tuple[int, int]] | None:
    """Half-open token index range per sentence; None if any token
    straddles a sentence boundary."""
    out: list[tuple[int, int]] = []
    t = 0
    n = len(tokens)
    for cs, ce in char_ranges:
        first = t
        while t < n and tokens[t].char_start + len(tokens[t].text) <= ce:
            if tokens[t].char_start < cs:
                return None
            t += 1
        out.append((first, t))
    if t != n:
        return None
    return out


def build_paraphrased_context(
    example: Example,
    char_ranges: Sequence[tuple[int, int]],
    token_ranges: Sequence[tuple[int, int]],
    replacements: dict[int, str],
    threshold: float = 0.8,
    max_span_slack: int = 5,
) -> tuple[str, list[Token], list[DetectedAnswer]] | None:
    """Rebuilds the context with paraphrased sentences substituted.

    Unreplaced sentences keep their raw text and tokens, shifted by the
    accumulated length delta; replaced sentences are whitespace-tokenized
    anew and their answers recovered with remap_answer. Returns None when
    no detected answer survives.
    """
    if not replacements:
        return example.context, list(example.context_tokens), list(example.qa.detected_answers)

    pieces: list[str] = []
    new_tokens: list[Token] = []
    new_sentence_first: list[int] = []  # first new-token index per sentence
    token_shift: list[int | None] = []  # new_index - old_index for unreplaced sentences
    out_pos = 0
    for s, ((cs, ce), (ts, te)) in enumerate(zip(char_ranges, token_ranges)):
        if s > 0:
            out_pos += 1  # sentences joined by one space
        new_sentence_first.append(len(new_tokens))
        if s in replacements:
            text = replacements[s]
            new_tokens.extend(whitespace_tokens(text, out_pos))
            token_shift.append(None)
        else:
            text = example.context[cs:ce]
            delta = out_pos - cs
            new_tokens.extend(Token(tok.text, tok.char_start + delta) for tok in example.context_tokens[ts:te])
            token_shift.append(len(new_tokens) - te)
        pieces.append(text)
        out_pos += len(text)
    new_context = " ".join(pieces)

    def answer_from_new_tokens(ns: int, ne: int) -> DetectedAnswer:
        cs2 = new_tokens[ns].char_start
        ce2 = new_tokens[ne].char_start + len(new_tokens[ne].text) - 1
        return DetectedAnswer(
            text=new_context[cs2 : ce2 + 1], token_span=(ns, ne), char_span=(cs2, ce2)
        )

    new_answers: list[DetectedAnswer] = []
    for ans in example.qa.detected_answers:
        a_ts, a_te = ans.token_span
        sent_idx = -1
        for s, (ts, te) in enumerate(token_ranges):
            if a_ts >= ts and a_te < te:
                sent_idx = s
                break
        if sent_idx < 0:
            continue  # straddles a sentence boundary; unrecoverable
        shift = token_shift[sent_idx]
        if shift is not None:
            new_answers.append(answer_from_new_tokens(a_ts + shift, a_te + shift))
            continue
        base = new_sentence_first[sent_idx]
        end = (
            new_sentence_first[sent_idx + 1]
            if sent_idx + 1 < len(new_sentence_first)
            else len(new_tokens)
        )
        sent_tokens = [t.text for t in new_tokens[base:end]]
        answer_tokens = [t.text for t in example.context_tokens[a_ts : a_te + 1]]
        hit = remap_answer(sent_tokens, answer_tokens, threshold, max_span_slack)
        if hit is None:
            continue
        new_answers.append(answer_from_new_tokens(base + hit[0], base + hit[1]))

    if not new_answers:
        return None
    return new_context, new_tokens, new_answers


def read_paraphrases(path: str) -> ParaphraseSet:
    out = ParaphraseSet()
    with open_input(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"malformed paraphrase record: {exc}", path, line_no) from exc
            kind = record.get("target_kind")
            paraphrase = str(record.get("paraphrase", ""))
            original = str(record.get("original", ""))
            if not paraphrase.strip():
                out.empty_skipped += 1  # empty decode: keep the original text
                continue
            if kind == TARGET_QUERY:
                if "qid" not in record:
                    raise DatasetFormatError("query paraphrase needs qid", path, line_no)
                qid = str(record["qid"])
                out.query[qid] = ParaphraseRecord(
                    target_kind=kind, original=original, paraphrase=paraphrase, qid=qid
                )
            elif kind == TARGET_CONTEXT_SENTENCE:
                if "example_uid" not in record or "sentence_index" not in record:
                    raise DatasetFormatError(
                        "context paraphrase needs example_uid and sentence_index", path, line_no
                    )
                uid = str(record["example_uid"])
                idx = int(record["sentence_index"])
                out.context.setdefault(uid, {})[idx] = ParaphraseRecord(
                    target_kind=kind,
                    original=original,
                    paraphrase=paraphrase,
                    example_uid=uid,
                    sentence_index=idx,
                )
            else:
                raise DatasetFormatError(f"unknown target_kind {kind!r}", path, line_no)
    return out


def read_sentences(path: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    with open_input(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"malformed sentence record: {exc}", path, line_no) from exc
            if "example_uid" not in record or "sentences" not in record:
                raise DatasetFormatError("sentence record needs example_uid and sentences", path, line_no)
            out[str(record["example_uid"])] = [str(s) for s in record["sentences"]]
    return out


def merge_augmentations(
    examples: Iterable[Example],
    paraphrases: ParaphraseSet,
    sentences: dict[str, list[str]] | None = None,
    difficulty: dict[str, float] | None = None,
    cfg: AugmentConfig | None = None,
) -> tuple[list[Example], AugmentStats]:
    """Originals plus augmented copies.

    Each example is independently chosen for query and for context
    paraphrasing: by keyed Bernoulli draws in random mode, or by drawing
    round(p * n) examples without replacement from the difficulty-weighted
    distribution in hard/moderate/soft mode (missing difficulty entries
    count as maximally hard). A chosen example yields one augmented copy
    with the chosen sides swapped in, unless its answers cannot be
    recovered. Sidecar sentences are used when given; the crude built-in
    splitter otherwise.
    """
    cfg = cfg or AugmentConfig()
    pool = list(examples)
    stats = AugmentStats(n_input=len(pool))
    uids = [e.example_uid for e in pool]
    uid_set = set(uids)
    qid_set = {e.qa.qid for e in pool}

    stats.unknown_targets += sum(1 for qid in paraphrases.query if qid not in qid_set)
    stats.unknown_targets += sum(1 for uid in paraphrases.context if uid not in uid_set)

    if cfg.mode == "random":
        use_q = {uid for uid in uids if keyed_unit(cfg.seed, "aug:q", uid) < cfg.p_query}
        use_c = {uid for uid in uids if keyed_unit(cfg.seed, "aug:c", uid) < cfg.p_context}
    else:
        table = difficulty or {}
        probs = normalize([score(cfg.mode, table.get(e.qa.qid, 0.0), cfg.epsilon) for e in pool])
        k_q = round(cfg.p_query * len(pool))
        k_c = round(cfg.p_context * len(pool))
        use_q = set(weighted_sample(uids, probs, k_q, cfg.seed, "aug:q"))
        use_c = set(weighted_sample(uids, probs, k_c, cfg.seed, "aug:c"))

    augmented: list[Example] = []
    for example in pool:
        uid = example.example_uid
        qa = example.qa

        applied_q = False
        question, question_tokens = qa.question, qa.question_tokens
        if uid in use_q:
            q_rec = paraphrases.query.get(qa.qid)
            if q_rec is None:
                stats.missing_paraphrase += 1
            else:
                question = q_rec.paraphrase
                question_tokens = whitespace_tokens(question)
                applied_q = True

        applied_c = False
        dropped = False
        context, context_tokens = example.context, example.context_tokens
        answers = qa.detected_answers
        if uid in use_c:
            c_recs = paraphrases.context.get(uid)
            if not c_recs:
                stats.missing_paraphrase += 1
            else:
                sents = (sentences or {}).get(uid) or split_sentences(example.context)
                char_ranges = align_sentences(example.context, sents)
                token_ranges = (
                    sentence_token_ranges(example.context_tokens, char_ranges)
                    if char_ranges is not None
                    else None
                )
                if char_ranges is None or token_ranges is None:
                    stats.unaligned += 1
                else:
                    replacements = {
                        idx: rec.paraphrase
                        for idx, rec in c_recs.items()
                        if 0 <= idx < len(sents)
                    }
                    built = build_paraphrased_context(
                        example,
                        char_ranges,
                        token_ranges,
                        replacements,
                        cfg.jaccard_threshold,
                        cfg.max_span_slack,
                    )
                    if built is None:
                        stats.dropped_no_answer += 1
                        dropped = True
                    else:
                        context, context_tokens, answers = built
                        applied_c = True

        if dropped or not (applied_q or applied_c):
            continue
        augmented.append(
            Example(
                dataset=example.dataset,
                context=context,
                context_tokens=list(context_tokens),
                qa=QA(
                    qid=qa.qid + "~aug",
                    question=question,
                    question_tokens=list(question_tokens),
                    detected_answers=list(answers),
                    gold_answers=list(qa.gold_answers),
                ),
            )
        )
    stats.n_augmented = len(augmented)
    return pool + augmented, stats
