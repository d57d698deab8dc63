"""Per-dataset capping and difficulty-weighted sampling.

Capping keeps at most a fixed number of examples per dataset, drawn
uniformly. Weighted sampling skews augmentation toward examples the
current model scores poorly: each example is scored from its F1, scores
are normalized into a distribution, and samples are drawn without
replacement by sequential renormalized draws.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _kernels
from .dataset_io import DatasetFormatError, open_input, open_output
from .records import Example
from .rng import keyed_generator, keyed_unit

DEFAULT_CAP = 120_000
DEFAULT_PER_DATASET_CAPS = {"SearchQA": 100_000}
EPSILON = 0.01

SCORE_MODES = ("random", "hard", "moderate", "soft")


@dataclass
class CapConfig:
    default_cap: int = DEFAULT_CAP
    per_dataset_caps: dict[str, int] = field(
        default_factory=lambda: dict(DEFAULT_PER_DATASET_CAPS)
    )
    seed: int = 0

    def cap_for(self, dataset: str) -> int:
        cap = self.per_dataset_caps.get(dataset, self.default_cap)
        if cap < 0:
            raise ValueError(f"cap for {dataset!r} must be >= 0, got {cap}")
        return cap


def cap_by_dataset(examples: Iterable[Example], cfg: CapConfig) -> Iterator[Example]:
    """Keeps at most cap examples per dataset, in input order.

    Selection assigns every example a keyed-hash priority and keeps the
    lowest-priority cap examples, which is a uniform random subset that
    does not depend on iteration order or parallel splitting. Memory is
    bounded by the surviving examples.
    """
    # per dataset: max-heap (negated priority) of (priority, arrival, example)
    heaps: dict[str, list[tuple[float, int, int, Example]]] = {}
    for arrival, example in enumerate(examples):
        cap = cfg.cap_for(example.dataset)
        if cap == 0:
            continue
        priority = keyed_unit(cfg.seed, f"cap:{example.dataset}", example.example_uid)
        heap = heaps.setdefault(example.dataset, [])
        if len(heap) < cap:
            heapq.heappush(heap, (-priority, -arrival, arrival, example))
        elif -priority > heap[0][0]:
            heapq.heapreplace(heap, (-priority, -arrival, arrival, example))

    survivors = [entry for heap in heaps.values() for entry in heap]
    survivors.sort(key=lambda entry: entry[2])
    for entry in survivors:
        yield entry[3]


def score(mode: str, f1: float, epsilon: float = EPSILON) -> float:
    """Difficulty score of an example from its F1; higher means sampled more.

    hard: 1 - f1 + epsilon, moderate: 2 - f1, soft: 3 - f1, random: 1.
    Epsilon keeps fully solved examples at a nonzero probability.
    """
    if not 0.0 <= f1 <= 1.0:
        raise ValueError(f"f1 must be in [0, 1], got {f1}")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if mode == "random":
        return 1.0
    if mode == "hard":
        return 1.0 - f1 + epsilon
    if mode == "moderate":
        return 2.0 - f1
    if mode == "soft":
        return 3.0 - f1
    raise ValueError(f"unknown score mode {mode!r}")


def normalize(scores: Sequence[float]) -> list[float]:
    """Scores to a probability distribution: P_i = S_i / sum(S)."""
    if len(scores) == 0:
        raise ValueError("cannot normalize an empty score list")
    for s in scores:
        if s <= 0:
            raise ValueError(f"scores must be positive, got {s}")
    total = float(np.sum(np.asarray(scores, np.float64)))
    return [float(s) / total for s in scores]


def weighted_sample(
    population: Sequence,
    probs: Sequence[float],
    k: int,
    seed: int,
    purpose: str = "weighted-sample",
) -> list:
    """k distinct items drawn without replacement, biased by probs.

    Sequential draw-and-remove with renormalization: each draw picks from
    the distribution restricted to the remaining items. Deterministic
    given (seed, purpose).
    """
    if len(population) != len(probs):
        raise ValueError(f"population ({len(population)}) and probs ({len(probs)}) differ in length")
    if k > len(population):
        raise ValueError(f"cannot draw {k} from a population of {len(population)}")
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return []
    weights = np.asarray(probs, np.float64)
    if np.any(weights <= 0):
        raise ValueError("probs must be positive")
    if abs(float(weights.sum()) - 1.0) > 1e-6:
        raise ValueError("probs must form a distribution (sum to 1)")
    uniforms = keyed_generator(seed, purpose).random(k)
    indices = _kernels.weighted_draw(weights, k, uniforms)
    return [population[int(i)] for i in indices]


def read_difficulty(path: str) -> dict[str, float]:
    """Loads a {qid, f1} JSONL difficulty table."""
    table: dict[str, float] = {}
    with open_input(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"malformed difficulty record: {exc}", path, line_no) from exc
            if "qid" not in record or "f1" not in record:
                raise DatasetFormatError("difficulty record needs qid and f1", path, line_no)
            f1 = float(record["f1"])
            if not 0.0 <= f1 <= 1.0:
                raise DatasetFormatError(f"f1 {f1} outside [0, 1]", path, line_no)
            table[str(record["qid"])] = f1
    return table


def write_difficulty(table: dict[str, float], path: str) -> None:
    with open_output(path) as f:
        for qid, f1 in table.items():
            f.write(json.dumps({"qid": qid, "f1": f1}) + "\n")
