"""Capping, difficulty scores, normalization, weighted draws."""

from __future__ import annotations

import pytest

from conftest import random_example
from mrqakit.sampling import (
    DEFAULT_CAP,
    DEFAULT_PER_DATASET_CAPS,
    CapConfig,
    cap_by_dataset,
    normalize,
    read_difficulty,
    score,
    weighted_sample,
    write_difficulty,
)


class TestScore:
    def test_hard_at_perfect_f1_keeps_epsilon(self):
        assert score("hard", 1.0) == pytest.approx(0.01, abs=1e-15)

    def test_moderate_midpoint(self):
        assert score("moderate", 0.5) == 1.5

    def test_soft_endpoint(self):
        assert score("soft", 1.0) == 2.0

    def test_random_is_constant(self):
        assert score("random", 0.0) == score("random", 1.0) == 1.0

    def test_f1_out_of_range_is_an_error(self):
        with pytest.raises(ValueError):
            score("hard", 1.5)
        with pytest.raises(ValueError):
            score("soft", -0.1)

    def test_unknown_mode_is_an_error(self):
        with pytest.raises(ValueError, match="unknown score mode"):
            score("extreme", 0.5)

    def test_strictly_decreasing_and_mode_ordering(self):
        grid = [i / 50 for i in range(51)]
        for mode in ("hard", "moderate", "soft"):
            values = [score(mode, f1) for f1 in grid]
            assert all(a > b for a, b in zip(values, values[1:]))
        for f1 in grid:
            assert score("hard", f1) < score("moderate", f1) < score("soft", f1)


class TestNormalize:
    def test_two_scores(self):
        probs = normalize([1.01, 0.01])
        assert probs[0] == pytest.approx(0.9901960784313726, abs=1e-15)
        assert probs[1] == pytest.approx(0.00980392156862745, abs=1e-15)

    def test_uniform_from_equal_scores(self):
        assert normalize([1, 1, 1, 1]) == [0.25] * 4

    def test_sums_to_one(self, rng):
        for _ in range(50):
            scores = rng.random(int(rng.integers(1, 40))) + 1e-6
            assert abs(sum(normalize(list(scores))) - 1.0) < 1e-12

    def test_scale_invariance(self, rng):
        scores = list(rng.random(20) + 0.01)
        base = normalize(scores)
        scaled = normalize([s * 37.5 for s in scores])
        assert all(abs(a - b) < 1e-12 for a, b in zip(base, scaled))

    def test_empty_or_nonpositive_is_an_error(self):
        with pytest.raises(ValueError):
            normalize([])
        with pytest.raises(ValueError):
            normalize([0.5, 0.0])


class TestWeightedSample:
    def test_full_draw_returns_population(self):
        population = ["a", "b", "c", "d"]
        out = weighted_sample(population, [0.1, 0.2, 0.3, 0.4], 4, seed=7)
        assert sorted(out) == population

    def test_oversized_k_is_an_error(self):
        with pytest.raises(ValueError, match="cannot draw"):
            weighted_sample(["a"], [1.0], 2, seed=0)

    def test_near_deterministic_head(self):
        probs = normalize([1.0, 1e-12, 1e-12])
        for seed in range(50):
            assert weighted_sample(["a", "b", "c"], probs, 1, seed=seed) == ["a"]

    def test_deterministic_given_seed(self):
        population = list(range(100))
        probs = normalize([i + 1 for i in range(100)])
        a = weighted_sample(population, probs, 30, seed=42)
        b = weighted_sample(population, probs, 30, seed=42)
        c = weighted_sample(population, probs, 30, seed=43)
        assert a == b
        assert a != c
        assert len(set(a)) == 30

    def test_single_draw_frequencies_match_distribution(self):
        # 100k seeded single draws from P = [0.99, 0.01]
        hits = 0
        for seed in range(100_000):
            if weighted_sample([0, 1], [0.99, 0.01], 1, seed=seed) == [0]:
                hits += 1
        assert abs(hits - 99_000) <= 300

    def test_small_distribution_frequencies_within_one_percent(self):
        probs = normalize([5, 3, 2])
        counts = [0, 0, 0]
        trials = 30_000
        for seed in range(trials):
            counts[weighted_sample([0, 1, 2], probs, 1, seed=seed)[0]] += 1
        for i, p in enumerate(probs):
            assert abs(counts[i] / trials - p) < 0.01


class TestCapByDataset:
    def test_under_cap_passes_everything(self, rng):
        examples = [random_example(rng, qid=f"q{i}") for i in range(3)]
        out = list(cap_by_dataset(examples, CapConfig(default_cap=5)))
        assert out == examples

    def test_over_cap_keeps_exact_count_deterministically(self, rng):
        examples = [random_example(rng, qid=f"q{i}") for i in range(200)]
        cfg = CapConfig(default_cap=50, seed=11)
        first = list(cap_by_dataset(examples, cfg))
        second = list(cap_by_dataset(examples, cfg))
        assert len(first) == 50
        assert first == second
        other = list(cap_by_dataset(examples, CapConfig(default_cap=50, seed=12)))
        assert other != first

    def test_survivors_keep_input_order_and_membership(self, rng):
        examples = [random_example(rng, qid=f"q{i}") for i in range(80)]
        out = list(cap_by_dataset(examples, CapConfig(default_cap=30, seed=3)))
        index = {e.example_uid: i for i, e in enumerate(examples)}
        positions = [index[e.example_uid] for e in out]
        assert positions == sorted(positions)
        assert set(positions) <= set(range(80))

    def test_selection_is_order_independent(self, rng):
        examples = [random_example(rng, qid=f"q{i}") for i in range(120)]
        cfg = CapConfig(default_cap=40, seed=9)
        forward = {e.example_uid for e in cap_by_dataset(examples, cfg)}
        backward = {e.example_uid for e in cap_by_dataset(list(reversed(examples)), cfg)}
        assert forward == backward

    def test_caps_apply_per_dataset(self, rng):
        examples = [random_example(rng, qid=f"a{i}", dataset="alpha") for i in range(30)]
        examples += [random_example(rng, qid=f"b{i}", dataset="beta") for i in range(30)]
        cfg = CapConfig(default_cap=10, per_dataset_caps={"beta": 4}, seed=5)
        out = list(cap_by_dataset(examples, cfg))
        assert sum(1 for e in out if e.dataset == "alpha") == 10
        assert sum(1 for e in out if e.dataset == "beta") == 4

    def test_published_default_caps(self):
        cfg = CapConfig()
        assert cfg.default_cap == DEFAULT_CAP == 120_000
        assert cfg.cap_for("SearchQA") == DEFAULT_PER_DATASET_CAPS["SearchQA"] == 100_000
        assert cfg.cap_for("SQuAD") == 120_000


def test_difficulty_round_trip(tmp_path):
    path = str(tmp_path / "difficulty.jsonl")
    table = {"q1": 0.25, "q2": 1.0, "q3": 0.0}
    write_difficulty(table, path)
    assert read_difficulty(path) == table
    # the advertised follow-on: hard score of an exported 0.25 entry
    assert score("hard", read_difficulty(path)["q1"]) == pytest.approx(0.76, abs=1e-12)
