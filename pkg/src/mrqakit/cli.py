"""Command-line interface.

One executable, subcommand per pipeline stage:

    validate  check a dataset file against the format invariants
    stats     per-dataset example/segment/no-answer counts
    segment   window a dataset into labeled segments
    sample    cap each dataset and merge the survivors
    augment   merge back-translation paraphrases into a dataset
    select    turn model logits into answer predictions
    eval      EM/F1 report against gold data
    pipeline  run a stage list from one JSON config

Every subcommand is a pure function of its inputs, flags, and seed:
repeated runs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import functools
import itertools
import json
import multiprocessing
import sys
import time
from typing import Iterable, Iterator

from . import augment as augment_mod
from . import metrics, sampling, segmenter, spans
from .dataset_io import DatasetFormatError, read_dataset, write_dataset
from .records import DatasetStats, Example, validate_example


class UsageError(Exception):
    pass


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return n


def _probability(value: str) -> float:
    p = float(value)
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {value}")
    return p


def _progress(stage: str, items: int, started: float) -> None:
    elapsed = max(time.perf_counter() - started, 1e-9)
    print(f"progress stage={stage} items={items} rate={items / elapsed:.0f}/s", file=sys.stderr)


def _counted(stage: str, items: Iterable, every: int = 50_000) -> Iterator:
    started = time.perf_counter()
    count = 0
    for item in items:
        count += 1
        if count % every == 0:
            _progress(stage, count, started)
        yield item
    _progress(stage, count, started)


# ---------------------------------------------------------------- validate


def cmd_validate(args: argparse.Namespace) -> int:
    n_bad = 0
    n_seen = 0
    for example in read_dataset(args.input, dataset_override=args.dataset):
        n_seen += 1
        for violation in validate_example(example):
            print(f"{example.example_uid}: {violation}")
            n_bad += 1
    print(f"checked {n_seen} examples, {n_bad} violations", file=sys.stderr)
    return 1 if n_bad else 0


# ------------------------------------------------------------------- stats


def _stats_table(stats: list[DatasetStats]) -> str:
    rows = [("Dataset", "Examples", "Segments", "NA (%)")]
    for s in stats:
        rows.append((s.dataset, str(s.n_examples), str(s.n_segments), f"{100 * s.na_fraction:.1f}"))
    total_ex = sum(s.n_examples for s in stats)
    total_seg = sum(s.n_segments for s in stats)
    total_na = sum(s.na_fraction * s.n_segments for s in stats)
    rows.append(
        ("Total", str(total_ex), str(total_seg), f"{100 * total_na / total_seg:.1f}" if total_seg else "0.0")
    )
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = []
    for i, row in enumerate(rows):
        lines.append(
            f"{row[0]:<{widths[0]}}  {row[1]:>{widths[1]}}  {row[2]:>{widths[2]}}  {row[3]:>{widths[3]}}"
        )
        if i == 0 or i == len(rows) - 2:
            lines.append("-" * (sum(widths) + 6))
    return "\n".join(lines)


def cmd_stats(args: argparse.Namespace) -> int:
    examples = _counted("stats", read_dataset(args.input, dataset_override=args.dataset))
    stats = segmenter.dataset_stats(
        examples, args.max_seq_length, args.doc_stride, args.window_mode.replace("-", "_")
    )
    print(_stats_table(stats))
    if args.records:
        from .dataset_io import open_output

        with open_output(args.records) as f:
            for s in stats:
                f.write(
                    json.dumps(
                        {
                            "dataset": s.dataset,
                            "n_examples": s.n_examples,
                            "n_segments": s.n_segments,
                            "na_fraction": s.na_fraction,
                        }
                    )
                    + "\n"
                )
    return 0


# ----------------------------------------------------------------- segment


def _segment_worker(example: Example, kwargs: dict) -> list[dict]:
    return [segmenter.segment_to_record(s) for s in segmenter.segment_example(example, **kwargs)]


def cmd_segment(args: argparse.Namespace) -> int:
    if args.doc_stride > args.max_seq_length:
        raise UsageError("--doc-stride must not exceed --max-seq-length (coverage gap)")
    kwargs = dict(
        max_seq_len=args.max_seq_length,
        doc_stride=args.doc_stride,
        mode=args.window_mode.replace("-", "_"),
        include_negatives=args.include_negatives,
        answers_per_example=args.answers_per_example,
    )
    examples = _counted("segment", read_dataset(args.input, dataset_override=args.dataset))
    worker = functools.partial(_segment_worker, kwargs=kwargs)
    from .dataset_io import open_output

    n_segments = 0
    with open_output(args.output) as f:
        if args.jobs > 1:
            with multiprocessing.Pool(args.jobs) as pool:
                for records in pool.imap(worker, examples, chunksize=64):
                    for record in records:
                        f.write(json.dumps(record, ensure_ascii=False) + "\n")
                        n_segments += 1
        else:
            for example in examples:
                for seg in segmenter.segment_example(example, **kwargs):
                    f.write(json.dumps(segmenter.segment_to_record(seg), ensure_ascii=False) + "\n")
                    n_segments += 1
    print(f"wrote {n_segments} segments to {args.output}", file=sys.stderr)
    return 0


# ------------------------------------------------------------------ sample


def _parse_cap(value: str) -> tuple[str, int]:
    name, sep, num = value.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected DATASET=N, got {value!r}")
    n = int(num)
    if n < 0:
        raise argparse.ArgumentTypeError(f"cap must be >= 0, got {value!r}")
    return name, n


def cmd_sample(args: argparse.Namespace) -> int:
    caps = dict(sampling.DEFAULT_PER_DATASET_CAPS)
    caps.update(dict(args.cap or []))
    cfg = sampling.CapConfig(default_cap=args.default_cap, per_dataset_caps=caps, seed=args.seed)
    stream = itertools.chain.from_iterable(read_dataset(path) for path in args.inputs)
    survivors = list(sampling.cap_by_dataset(_counted("sample", stream), cfg))
    datasets = sorted({e.dataset for e in survivors})
    header = {"dataset": datasets[0] if len(datasets) == 1 else "mixed", "datasets": datasets}
    n = write_dataset(survivors, args.output, header=header, allow_mixed=len(datasets) > 1)
    print(f"wrote {n} examples to {args.output}", file=sys.stderr)
    return 0


# ----------------------------------------------------------------- augment


def cmd_augment(args: argparse.Namespace) -> int:
    cfg = augment_mod.AugmentConfig(
        p_query=args.pq,
        p_context=args.pc,
        mode=args.mode,
        jaccard_threshold=args.threshold,
        max_span_slack=args.max_span_slack,
        seed=args.seed,
        epsilon=args.epsilon,
    )
    if args.mode != "random" and not args.difficulty:
        raise UsageError(f"--mode {args.mode} needs --difficulty (per-question F1 table)")
    paraphrases = augment_mod.read_paraphrases(args.paraphrases)
    sentences = augment_mod.read_sentences(args.sentences) if args.sentences else None
    if paraphrases.context and sentences is None and not args.fallback_split:
        raise UsageError(
            "context paraphrases need --sentences (or --fallback-split for synthetic data)"
        )
    difficulty = sampling.read_difficulty(args.difficulty) if args.difficulty else None
    examples = _counted("augment", read_dataset(args.input, dataset_override=args.dataset))
    merged, stats = augment_mod.merge_augmentations(examples, paraphrases, sentences, difficulty, cfg)
    n = write_dataset(merged, args.output, allow_mixed=True)
    print(
        f"wrote {n} examples ({stats.n_augmented} augmented; "
        f"missing_paraphrase={stats.missing_paraphrase} unknown_targets={stats.unknown_targets} "
        f"unaligned={stats.unaligned} dropped_no_answer={stats.dropped_no_answer} "
        f"empty_paraphrases_kept_original={paraphrases.empty_skipped})",
        file=sys.stderr,
    )
    return 0


# ------------------------------------------------------------------ select


def cmd_select(args: argparse.Namespace) -> int:
    segments = {s.segment_uid: s for s in segmenter.read_segments(args.segments)}
    logits = _counted("select", spans.read_logits(args.logits))
    predictions = spans.select_predictions(
        segments,
        logits,
        beam=args.beam,
        max_answer_len=args.max_answer_length,
        raw_scores=args.raw_logit_scores,
    )
    n = spans.emit_predictions(predictions, args.out, args.n_best)
    print(f"wrote {n} predictions to {args.out}", file=sys.stderr)
    return 0


# -------------------------------------------------------------------- eval


def cmd_eval(args: argparse.Namespace) -> int:
    predictions = spans.read_predictions(args.predictions)
    golds = itertools.chain.from_iterable(read_dataset(path) for path in args.gold)
    report = metrics.evaluate(predictions, _counted("eval", golds))
    print(metrics.format_report(report))
    if args.report:
        metrics.write_report(report, args.report)
    if args.export_difficulty:
        metrics.export_difficulty(report, args.export_difficulty)
    return 0


# ---------------------------------------------------------------- pipeline

_STAGE_POSITIONALS = {
    "validate": ["input"],
    "stats": ["input"],
    "segment": ["input", "output"],
    "sample": ["inputs", "output"],
    "augment": ["input", "output"],
    "select": [],
    "eval": [],
}


def _stage_argv(stage: dict) -> list[str]:
    name = stage["stage"]
    argv = [name]
    consumed = {"stage"}
    for key in _STAGE_POSITIONALS[name]:
        if key not in stage:
            raise UsageError(f"pipeline stage {name!r} is missing {key!r}")
        value = stage[key]
        argv.extend([str(v) for v in value] if isinstance(value, list) else [str(value)])
        consumed.add(key)
    for key, value in stage.items():
        if key in consumed:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            argv.append(flag if value else "--no-" + flag[2:])
        elif isinstance(value, list):
            argv.append(flag)
            argv.extend(str(v) for v in value)
        else:
            argv.extend([flag, str(value)])
    return argv


def cmd_pipeline(args: argparse.Namespace) -> int:
    with open(args.config, "r", encoding="utf-8") as f:
        config = json.load(f)
    stages = config.get("stages")
    if not isinstance(stages, list) or not stages:
        raise UsageError("pipeline config needs a non-empty 'stages' list")
    seed = args.seed if args.seed is not None else config.get("seed", 0)

    outputs: set[str] = set()
    for stage in stages:
        for key in ("output", "out"):
            if key in stage:
                path = str(stage[key])
                if path in outputs:
                    raise UsageError(f"pipeline stage outputs collide on {path!r}")
                outputs.add(path)

    parser = build_parser()
    for stage in stages:
        if not isinstance(stage, dict) or "stage" not in stage:
            raise UsageError("every pipeline stage needs a 'stage' name")
        name = stage["stage"]
        if name not in _STAGE_POSITIONALS:
            raise UsageError(f"unknown pipeline stage {name!r}")
        stage = dict(stage)
        if name in ("sample", "augment") and "seed" not in stage:
            stage["seed"] = seed
        argv = _stage_argv(stage)
        print(f"pipeline running: {' '.join(argv)}", file=sys.stderr)
        ns = parser.parse_args(argv)
        code = ns.handler(ns)
        if code != 0:
            print(f"pipeline stage {name!r} failed with exit code {code}", file=sys.stderr)
            return code
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrqakit",
        description="Data-side toolkit for multi-domain extractive QA.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("validate", help="check a dataset file", formatter_class=fmt)
    p.add_argument("input", help="dataset file (JSONL, optionally gzipped)")
    p.add_argument("--dataset", default=None, help="override the header dataset name")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("stats", help="example/segment/no-answer counts", formatter_class=fmt)
    p.add_argument("input")
    p.add_argument("--dataset", default=None, help="override the header dataset name")
    p.add_argument("--max-seq-length", type=_positive_int, default=512, help="token budget per segment")
    p.add_argument("--doc-stride", type=_positive_int, default=128, help="token step between windows")
    p.add_argument(
        "--window-mode",
        choices=["model-budget", "literal"],
        default="model-budget",
        help="whether the question shares the token budget",
    )
    p.add_argument("--records", default=None, help="also write machine-readable JSONL here")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("segment", help="window a dataset into labeled segments", formatter_class=fmt)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--dataset", default=None, help="override the header dataset name")
    p.add_argument("--max-seq-length", type=_positive_int, default=512, help="token budget per segment")
    p.add_argument("--doc-stride", type=_positive_int, default=128, help="token step between windows")
    p.add_argument(
        "--window-mode",
        choices=["model-budget", "literal"],
        default="model-budget",
        help="whether the question shares the token budget",
    )
    p.add_argument(
        "--include-negatives",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="keep windows without an answer, labeled abstain",
    )
    p.add_argument(
        "--answers-per-example",
        choices=["one", "all"],
        default="all",
        help="'one' keeps only the earliest detected answer occurrence",
    )
    p.add_argument("--jobs", type=_positive_int, default=1, help="data-parallel worker processes")
    p.set_defaults(handler=cmd_segment)

    p = sub.add_parser("sample", help="cap each dataset and merge survivors", formatter_class=fmt)
    p.add_argument("inputs", nargs="+", help="one or more dataset files")
    p.add_argument("output")
    p.add_argument("--default-cap", type=int, default=sampling.DEFAULT_CAP, help="max examples per dataset")
    p.add_argument(
        "--cap",
        type=_parse_cap,
        action="append",
        metavar="DATASET=N",
        help="per-dataset cap override (default SearchQA=100000); repeatable",
    )
    p.add_argument("--seed", type=int, default=0, help="selection seed")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("augment", help="merge back-translation paraphrases", formatter_class=fmt)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--dataset", default=None, help="override the header dataset name")
    p.add_argument("--paraphrases", required=True, help="paraphrase JSONL file")
    p.add_argument("--sentences", default=None, help="sentence sidecar JSONL file")
    p.add_argument(
        "--fallback-split",
        action="store_true",
        help="split contexts on {.!?}+space when no sidecar is given (synthetic data only)",
    )
    p.add_argument("--pq", type=_probability, default=0.2, help="query paraphrase probability")
    p.add_argument("--pc", type=_probability, default=0.4, help="context paraphrase probability")
    p.add_argument(
        "--mode",
        choices=list(sampling.SCORE_MODES),
        default="random",
        help="sampling distribution over examples",
    )
    p.add_argument("--difficulty", default=None, help="per-question F1 JSONL (from eval --export-difficulty)")
    p.add_argument("--threshold", type=float, default=0.8, help="minimum combined 2-gram score for a recovered span")
    p.add_argument("--max-span-slack", type=int, default=5, help="recovered span may exceed the answer length by this many tokens")
    p.add_argument("--epsilon", type=float, default=sampling.EPSILON, help="hard-mode score floor")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.set_defaults(handler=cmd_augment)

    p = sub.add_parser("select", help="model logits to answer predictions", formatter_class=fmt)
    p.add_argument("--segments", required=True, help="segments JSONL file")
    p.add_argument("--logits", required=True, help="logits JSONL file")
    p.add_argument("--out", required=True, help="predictions JSON file")
    p.add_argument("--n-best", default=None, help="optional n-best JSONL sidecar")
    p.add_argument("--beam", type=_positive_int, default=spans.DEFAULT_BEAM, help="candidates kept per question")
    p.add_argument(
        "--max-answer-length",
        type=_positive_int,
        default=spans.DEFAULT_MAX_ANSWER_LEN,
        help="longest candidate span in tokens",
    )
    p.add_argument(
        "--raw-logit-scores",
        action=argparse.BooleanOptionalAction,
        default=False,
        help="sum raw logits instead of per-segment log-probabilities",
    )
    p.set_defaults(handler=cmd_select)

    p = sub.add_parser("eval", help="EM/F1 report", formatter_class=fmt)
    p.add_argument("--predictions", required=True, help="predictions JSON file")
    p.add_argument("--gold", required=True, nargs="+", help="gold dataset file(s)")
    p.add_argument("--report", default=None, help="write the machine-readable report here")
    p.add_argument("--export-difficulty", default=None, help="write the {qid, f1} table here")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("pipeline", help="run a stage list from a JSON config", formatter_class=fmt)
    p.add_argument("config", help="JSON file: {seed, stages: [{stage, ...flags}]}")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(handler=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DatasetFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
