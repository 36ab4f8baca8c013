import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conceptcover.bitmask import Bitmask, jaccard, union
from conceptcover.errors import (
    EmptyConceptMaskError,
    OracleSizeError,
    ShapeMismatchError,
)
from conceptcover.ingest import FeatureMapStack
from conceptcover.recognition import (
    GreedyConfig,
    exhaustive_best_subset,
    greedy_selection,
    recognition_score,
)

from conftest import mask_pixels, random_mask, reference_greedy


def _stack(*masks: Bitmask) -> FeatureMapStack:
    return FeatureMapStack(masks[0].width, masks[0].height, list(masks))


def _random_instance(seed: int, side: int = 16, max_maps: int = 10):
    rng = np.random.default_rng(seed)
    n_maps = int(rng.integers(1, max_maps + 1))
    concept = random_mask(rng, side, side, float(rng.uniform(0.05, 0.5)))
    while concept.is_empty:
        concept = random_mask(rng, side, side, 0.3)
    planes = []
    for _ in range(n_maps):
        # mix of concept fragments and noise so selections are nontrivial
        frag = rng.random((side, side)) < rng.uniform(0.0, 0.6)
        plane = Bitmask.from_array(np.logical_and(frag, concept.to_array())
                                   if rng.random() < 0.5 else frag)
        planes.append(plane)
    return FeatureMapStack(side, side, planes), concept


class TestRecognitionScore:
    def test_empty_selection_scores_zero(self):
        assert recognition_score(Bitmask.full(4, 4), []) == 0.0

    def test_exact_cover_scores_one(self):
        concept = Bitmask.from_pixels(8, 8, [(0, 0), (1, 1), (2, 2)])
        a = Bitmask.from_pixels(8, 8, [(0, 0)])
        b = Bitmask.from_pixels(8, 8, [(1, 1), (2, 2)])
        assert recognition_score(concept, [a, b]) == 1.0

    def test_partial_cover(self):
        # concept: 10 px; union covers 7 of them plus 5 outside -> 7/15
        concept = Bitmask.from_pixels(16, 4, [(0, c) for c in range(10)])
        p1 = Bitmask.from_pixels(16, 4, [(0, c) for c in range(7)]
                                 + [(1, 0), (1, 1), (1, 2)])
        p2 = Bitmask.from_pixels(16, 4, [(1, 3), (1, 4)])
        assert recognition_score(concept, [p1, p2]) == pytest.approx(7 / 15, abs=1e-15)

    def test_empty_concept_rejected(self):
        with pytest.raises(EmptyConceptMaskError):
            recognition_score(Bitmask.zeros(4, 4), [Bitmask.full(4, 4)])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            recognition_score(Bitmask.full(4, 4), [Bitmask.full(5, 4)])


class TestGreedySelection:
    def test_perfect_map_dominates(self):
        concept = Bitmask.from_pixels(8, 8, [(r, r) for r in range(8)])
        other = Bitmask.from_pixels(8, 8, [(0, 1)])
        result = greedy_selection(_stack(concept, other), concept)
        assert result.selected_maps == [0]
        assert result.score == 1.0
        assert result.combined_mask == concept

    def test_all_weak_stack_selects_nothing(self):
        concept = Bitmask.full(32, 32)
        weak = Bitmask.from_pixels(32, 32, [(0, 0)])  # solo score 1/1024 < 0.01
        result = greedy_selection(_stack(weak, weak), concept)
        assert result.selected_maps == []
        assert result.score == 0.0
        assert result.score_trace == []
        assert result.combined_mask == Bitmask.zeros(32, 32)

    def test_disjoint_stack_selects_nothing(self):
        concept = Bitmask.from_pixels(8, 8, [(0, 0)])
        far = Bitmask.from_pixels(8, 8, [(7, 7)])
        result = greedy_selection(_stack(far), concept)
        assert result.selected_maps == []
        assert result.score == 0.0

    def test_tie_breaks_to_lowest_map_id(self):
        concept = Bitmask.from_pixels(8, 8, [(0, 0), (0, 1)])
        half_a = Bitmask.from_pixels(8, 8, [(0, 0)])
        result = greedy_selection(_stack(half_a, half_a, half_a), concept)
        assert result.selected_maps[0] == 0

    def test_empty_concept_rejected(self):
        with pytest.raises(EmptyConceptMaskError):
            greedy_selection(_stack(Bitmask.full(4, 4)), Bitmask.zeros(4, 4))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            greedy_selection(_stack(Bitmask.full(4, 4)), Bitmask.full(4, 5))

    def test_max_maps_cap(self):
        concept = Bitmask.from_pixels(8, 8, [(r, c) for r in range(4) for c in range(4)])
        quarters = [
            Bitmask.from_pixels(8, 8, [(r, c) for r in range(4) for c in range(4)
                                       if (r < 2) == top and (c < 2) == left])
            for top in (True, False) for left in (True, False)
        ]
        capped = greedy_selection(_stack(*quarters), concept,
                                  GreedyConfig(delta=0.0, max_maps=2))
        assert len(capped.selected_maps) == 2
        full = greedy_selection(_stack(*quarters), concept, GreedyConfig(delta=0.0))
        assert len(full.selected_maps) == 4
        assert full.score == 1.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GreedyConfig(delta=-0.1)
        with pytest.raises(ValueError):
            GreedyConfig(max_maps=0)

    def test_determinism(self):
        stack, concept = _random_instance(404)
        first = greedy_selection(stack, concept)
        second = greedy_selection(stack, concept)
        assert first.selected_maps == second.selected_maps
        assert first.score == second.score
        assert first.score_trace == second.score_trace


@settings(deadline=None, max_examples=150)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.01, 0.05, 0.2]))
def test_greedy_matches_reference_implementation(seed, delta):
    stack, concept = _random_instance(seed, side=12, max_maps=8)
    result = greedy_selection(stack, concept, GreedyConfig(delta=delta))
    ref_sel, ref_score, ref_trace = reference_greedy(
        [mask_pixels(m) for m in stack.masks], mask_pixels(concept), delta
    )
    assert result.selected_maps == ref_sel
    assert result.score == ref_score
    assert result.score_trace == ref_trace


@settings(deadline=None, max_examples=150)
@given(st.integers(0, 2**32 - 1))
def test_greedy_trace_invariants(seed):
    stack, concept = _random_instance(seed)
    cfg = GreedyConfig(delta=0.01)
    result = greedy_selection(stack, concept, cfg)
    assert len(set(result.selected_maps)) == len(result.selected_maps)
    previous = 0.0
    for value in result.score_trace:
        assert value - previous > cfg.delta
        previous = value
    assert result.score == (result.score_trace[-1] if result.score_trace else 0.0)
    expected_union = Bitmask.zeros(concept.width, concept.height)
    for map_id in result.selected_maps:
        expected_union = union(expected_union, stack.masks[map_id])
    assert result.combined_mask == expected_union
    if result.selected_maps:
        assert result.score == jaccard(concept, result.combined_mask)


@settings(deadline=None, max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_greedy_with_zero_delta_exhausts_improvements(seed):
    stack, concept = _random_instance(seed, side=10, max_maps=6)
    result = greedy_selection(stack, concept, GreedyConfig(delta=0.0))
    remaining = [i for i in range(len(stack.masks)) if i not in result.selected_maps]
    for map_id in remaining:
        candidate = [stack.masks[i] for i in result.selected_maps] + [stack.masks[map_id]]
        assert recognition_score(concept, candidate) <= result.score


@settings(deadline=None, max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_covered_subset_never_improves_score(seed):
    # a plane inside (already covered) & (concept) cannot raise the score
    rng = np.random.default_rng(seed)
    stack, concept = _random_instance(seed, side=10, max_maps=5)
    result = greedy_selection(stack, concept, GreedyConfig(delta=0.0))
    covered_inside = concept & result.combined_mask
    if covered_inside.is_empty:
        return
    arr = covered_inside.to_array()
    keep = rng.random(arr.shape) < 0.5
    subset = Bitmask.from_array(np.logical_and(arr, keep))
    with_subset = [stack.masks[i] for i in result.selected_maps] + [subset]
    assert recognition_score(concept, with_subset) <= result.score


class TestExhaustiveBestSubset:
    def test_single_map_positive_score(self):
        concept = Bitmask.from_pixels(4, 4, [(0, 0), (1, 1)])
        plane = Bitmask.from_pixels(4, 4, [(0, 0)])
        subset, score = exhaustive_best_subset(_stack(plane), concept, 1)
        assert subset == [0]
        assert score == 0.5

    def test_single_useless_map_yields_empty(self):
        concept = Bitmask.from_pixels(4, 4, [(0, 0)])
        plane = Bitmask.from_pixels(4, 4, [(3, 3)])
        subset, score = exhaustive_best_subset(_stack(plane), concept, 1)
        assert subset == []
        assert score == 0.0

    def test_concept_in_stack_scores_one(self):
        concept = Bitmask.from_pixels(6, 6, [(r, 0) for r in range(6)])
        noise = Bitmask.from_pixels(6, 6, [(0, 5)])
        subset, score = exhaustive_best_subset(_stack(noise, concept), concept, 2)
        assert score == 1.0
        assert subset == [1]

    def test_tie_prefers_lexicographically_smallest(self):
        concept = Bitmask.from_pixels(4, 4, [(0, 0)])
        dup = Bitmask.from_pixels(4, 4, [(0, 0)])
        subset, score = exhaustive_best_subset(_stack(dup, dup, dup), concept, 3)
        assert subset == [0]
        assert score == 1.0

    def test_refuses_oversized_stack(self):
        concept = Bitmask.full(4, 4)
        planes = [Bitmask.full(4, 4)] * 21
        with pytest.raises(OracleSizeError):
            exhaustive_best_subset(FeatureMapStack(4, 4, planes), concept, 2)

    def test_max_size_restricts_search(self):
        concept = Bitmask.from_pixels(4, 4, [(0, 0), (1, 1)])
        a = Bitmask.from_pixels(4, 4, [(0, 0)])
        b = Bitmask.from_pixels(4, 4, [(1, 1)])
        subset, score = exhaustive_best_subset(_stack(a, b), concept, 1)
        assert score == 0.5
        assert subset == [0]
        subset, score = exhaustive_best_subset(_stack(a, b), concept, 2)
        assert score == 1.0
        assert subset == [0, 1]


@settings(deadline=None, max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_oracle_never_below_greedy(seed):
    stack, concept = _random_instance(seed, side=10, max_maps=8)
    greedy = greedy_selection(stack, concept, GreedyConfig(delta=0.01))
    _, best = exhaustive_best_subset(stack, concept, len(stack.masks))
    assert best >= greedy.score
