"""Streaming reader/writer for the MRQA shared-task interchange format.

Files are JSONL (usually gzipped): line 1 is a header object carrying at
least the dataset name, every following line is one context record with
its tokenization and a list of QAs. Reading flattens records to one
Example per QA; memory stays bounded by a single record.
"""

from __future__ import annotations

import gzip
import io
import itertools
import json
import os
from typing import IO, Iterable, Iterator

from .records import QA, DetectedAnswer, Example, Token

GZIP_MAGIC = b"\x1f\x8b"


class DatasetFormatError(ValueError):
    """Malformed dataset file; carries the offending path and line number."""

    def __init__(self, message: str, path: str = "", line_no: int | None = None):
        self.path = path
        self.line_no = line_no
        where = f"{path}:{line_no}: " if line_no is not None else (f"{path}: " if path else "")
        super().__init__(where + message)


def _is_gzip(path: str) -> bool:
    with open(path, "rb") as f:
        return f.read(2) == GZIP_MAGIC


def open_input(path: str, expect_gzip: bool | None = None) -> IO[str]:
    """Opens a JSONL file for reading, transparently handling gzip.

    With expect_gzip=None the compression is sniffed from the magic bytes;
    True/False enforce the stated compression.
    """
    gzipped = _is_gzip(path)
    if expect_gzip is not None and expect_gzip != gzipped:
        raise DatasetFormatError(
            f"expected {'gzip' if expect_gzip else 'plain'} file, found "
            f"{'gzip' if gzipped else 'plain'}",
            path,
        )
    if gzipped:
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def open_output(path: str, gzip_output: bool | None = None) -> IO[str]:
    """Opens a JSONL file for writing; gzip is inferred from a .gz suffix.

    Gzip members are written with mtime=0 so identical content produces
    identical bytes on every run.
    """
    if gzip_output is None:
        gzip_output = path.endswith(".gz")
    raw = open(path, "wb")
    if gzip_output:
        # empty filename + zero mtime keep the gzip header byte-stable
        gz = gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0)
        return io.TextIOWrapper(gz, encoding="utf-8", newline="\n")
    return io.TextIOWrapper(raw, encoding="utf-8", newline="\n")


def _parse_tokens(raw, path: str, line_no: int, field: str) -> list[Token]:
    if not isinstance(raw, list):
        raise DatasetFormatError(f"field {field!r} must be a list of [text, offset] pairs", path, line_no)
    tokens = []
    for pair in raw:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise DatasetFormatError(f"field {field!r} has a malformed token entry {pair!r}", path, line_no)
        text, start = pair
        tokens.append(Token(str(text), int(start)))
    return tokens


def _require(record: dict, field: str, path: str, line_no: int):
    if field not in record:
        raise DatasetFormatError(f"missing required field {field!r}", path, line_no)
    return record[field]


def _parse_detected_answers(raw, path: str, line_no: int) -> list[DetectedAnswer]:
    answers: list[DetectedAnswer] = []
    for entry in raw:
        text = str(_require(entry, "text", path, line_no))
        char_spans = _require(entry, "char_spans", path, line_no)
        token_spans = _require(entry, "token_spans", path, line_no)
        if len(char_spans) != len(token_spans):
            raise DatasetFormatError(
                "char_spans and token_spans of a detected answer differ in length", path, line_no
            )
        for cspan, tspan in zip(char_spans, token_spans):
            answers.append(
                DetectedAnswer(
                    text=text,
                    token_span=(int(tspan[0]), int(tspan[1])),
                    char_span=(int(cspan[0]), int(cspan[1])),
                )
            )
    if not answers:
        raise DatasetFormatError("detected_answers is empty", path, line_no)
    return answers


def read_dataset(
    path: str,
    expect_gzip: bool | None = None,
    dataset_override: str | None = None,
) -> Iterator[Example]:
    """Streams Examples from an MRQA-format file, one per QA, in file order.

    qids must be unique within a dataset; a collision aborts the stream.
    """
    seen_qids: set[tuple[str, str]] = set()
    with open_input(path, expect_gzip) as f:
        header_line = f.readline()
        if not header_line.strip():
            raise DatasetFormatError("missing header line", path, 1)
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"malformed header: {exc}", path, 1) from exc
        if isinstance(header, dict) and isinstance(header.get("header"), dict):
            header = header["header"]
        if not isinstance(header, dict):
            raise DatasetFormatError("header line is not an object", path, 1)
        header_dataset = dataset_override or header.get("dataset")

        for line_no, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"malformed record: {exc}", path, line_no) from exc

            dataset = dataset_override or record.get("dataset") or header_dataset
            if not dataset:
                raise DatasetFormatError("missing required field 'dataset'", path, line_no)
            context = str(_require(record, "context", path, line_no))
            context_tokens = _parse_tokens(
                _require(record, "context_tokens", path, line_no), path, line_no, "context_tokens"
            )
            qas = _require(record, "qas", path, line_no)

            for qa_rec in qas:
                qid = str(_require(qa_rec, "qid", path, line_no))
                key = (dataset, qid)
                if key in seen_qids:
                    raise DatasetFormatError(f"duplicate qid {qid!r} in dataset {dataset!r}", path, line_no)
                seen_qids.add(key)

                detected = _parse_detected_answers(
                    _require(qa_rec, "detected_answers", path, line_no), path, line_no
                )
                golds = [str(a) for a in qa_rec.get("answers", [])]
                if not golds:
                    # order-preserving dedup of detected texts
                    golds = list(dict.fromkeys(a.text for a in detected))
                yield Example(
                    dataset=dataset,
                    context=context,
                    context_tokens=context_tokens,
                    qa=QA(
                        qid=qid,
                        question=str(_require(qa_rec, "question", path, line_no)),
                        question_tokens=_parse_tokens(
                            _require(qa_rec, "question_tokens", path, line_no),
                            path,
                            line_no,
                            "question_tokens",
                        ),
                        detected_answers=detected,
                        gold_answers=golds,
                    ),
                )


def example_to_record(example: Example) -> dict:
    """One Example as one single-QA context record."""
    qa = example.qa
    by_text: dict[str, dict] = {}
    for ans in qa.detected_answers:
        entry = by_text.setdefault(ans.text, {"text": ans.text, "char_spans": [], "token_spans": []})
        entry["char_spans"].append(list(ans.char_span))
        entry["token_spans"].append(list(ans.token_span))
    return {
        "dataset": example.dataset,
        "context": example.context,
        "context_tokens": [[t.text, t.char_start] for t in example.context_tokens],
        "qas": [
            {
                "qid": qa.qid,
                "question": qa.question,
                "question_tokens": [[t.text, t.char_start] for t in qa.question_tokens],
                "detected_answers": list(by_text.values()),
                "answers": qa.gold_answers,
            }
        ],
    }


def write_dataset(
    examples: Iterable[Example],
    path: str,
    header: dict | None = None,
    gzip_output: bool | None = None,
    allow_mixed: bool = False,
) -> int:
    """Writes Examples as an MRQA-format file; returns the number written.

    A file holds one dataset: mixing datasets is an error unless
    allow_mixed is set, in which case the header dataset is "mixed" and
    each record keeps its own dataset name.
    """
    count = 0
    dataset_seen: str | None = None
    if gzip_output is None:
        gzip_output = path.endswith(".gz")  # decide from the final name, not the temp name
    tmp = path + ".tmp"
    try:
        with open_output(tmp, gzip_output) as f:
            # header needs a dataset name, so peek at the first example
            examples = iter(examples)
            first = next(examples, None)
            header_obj = dict(header or {})
            if "dataset" not in header_obj:
                header_obj["dataset"] = "mixed" if allow_mixed else (first.dataset if first else "empty")
            f.write(json.dumps({"header": header_obj}, ensure_ascii=False) + "\n")

            for example in itertools.chain([] if first is None else [first], examples):
                if dataset_seen is None:
                    dataset_seen = example.dataset
                elif example.dataset != dataset_seen and not allow_mixed:
                    raise ValueError(
                        f"dataset file is per-dataset: found {example.dataset!r} after "
                        f"{dataset_seen!r} (pass allow_mixed to write a merged file)"
                    )
                f.write(json.dumps(example_to_record(example), ensure_ascii=False) + "\n")
                count += 1
    except Exception:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    os.replace(tmp, path)
    return count
