"""Concept-recognition coverage scoring over CNN feature-map masks."""

from .bitmask import Bitmask, MaskSetOpsResult, counts, intersection, jaccard, union
from .recognition import (
    GreedyConfig,
    RecognitionResult,
    exhaustive_best_subset,
    greedy_selection,
    recognition_score,
)
from .stats import distribution_stats, linear_fit, pearson

__version__ = "0.1.0"

__all__ = [
    "Bitmask",
    "GreedyConfig",
    "MaskSetOpsResult",
    "RecognitionResult",
    "counts",
    "distribution_stats",
    "exhaustive_best_subset",
    "greedy_selection",
    "intersection",
    "jaccard",
    "linear_fit",
    "pearson",
    "recognition_score",
    "union",
]
