"""Recognition scoring and greedy feature-map subset selection.

A concept is "recognized" by a set of feature maps when the union of their
binarized activation planes covers the concept's segmentation mask tightly:
the score is |mask & union| / |mask | union|. Selection greedily adds the
plane yielding the highest new score and stops once the best improvement no
longer exceeds ``delta``; ties go to the lowest feature-map id so runs are
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bitmask import Bitmask
from .errors import EmptyConceptMaskError, OracleSizeError, ShapeMismatchError
from .ingest import FeatureMapStack

EXHAUSTIVE_MAX_STACK = 20


@dataclass(frozen=True)
class GreedyConfig:
    """Stopping rule: accept a map only if it improves the score by > delta."""

    delta: float = 0.01
    max_maps: int | None = None

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.max_maps is not None and self.max_maps < 1:
            raise ValueError(f"max_maps must be >= 1, got {self.max_maps}")


@dataclass
class RecognitionResult:
    """Selected feature-map subset and score trace for one (image, concept)."""

    concept_name: str
    image_id: str
    selected_maps: list[int]
    score: float
    score_trace: list[float]
    combined_mask: Bitmask


def _check_concept(concept_mask: Bitmask) -> None:
    if concept_mask.is_empty:
        raise EmptyConceptMaskError("concept mask has no set pixels")


def _check_stack_shape(stack: FeatureMapStack, concept_mask: Bitmask) -> None:
    if (stack.width, stack.height) != (concept_mask.width, concept_mask.height):
        raise ShapeMismatchError(
            f"stack is {stack.width}x{stack.height}, concept mask is "
            f"{concept_mask.width}x{concept_mask.height}"
        )


def recognition_score(concept_mask: Bitmask, selected: list[Bitmask]) -> float:
    """Score of a chosen set of planes against a nonempty concept mask.

    An empty selection scores 0; otherwise |mask & U| / |mask | U| where U is
    the union of the selected planes.
    """
    _check_concept(concept_mask)
    m_bits = concept_mask._bits
    union = 0
    for plane in selected:
        if (plane.width, plane.height) != (concept_mask.width, concept_mask.height):
            raise ShapeMismatchError(
                f"plane is {plane.width}x{plane.height}, concept mask is "
                f"{concept_mask.width}x{concept_mask.height}"
            )
        union |= plane._bits
    inter = (m_bits & union).bit_count()
    return inter / (concept_mask.popcount + union.bit_count() - inter)


def greedy_selection(
    stack: FeatureMapStack,
    concept_mask: Bitmask,
    cfg: GreedyConfig = GreedyConfig(),
    concept_name: str = "",
    image_id: str = "",
) -> RecognitionResult:
    """Greedily select the feature maps that best cover the concept.

    Each iteration scores every remaining candidate as if added to the
    selection and takes the best one (lowest id on ties). The chosen map is
    accepted only if it improves the running score by strictly more than
    ``cfg.delta``; otherwise selection stops. An all-weak stack therefore
    yields an empty selection with score 0.
    """
    _check_concept(concept_mask)
    _check_stack_shape(stack, concept_mask)

    m_bits = concept_mask._bits
    m_pop = concept_mask.popcount
    planes = [m._bits for m in stack.masks]
    candidates = list(range(len(planes)))

    covered = 0
    score = 0.0
    selected: list[int] = []
    trace: list[float] = []

    while candidates and (cfg.max_maps is None or len(selected) < cfg.max_maps):
        best_score = 0.0
        best_id = -1
        for k in candidates:
            d = covered | planes[k]
            inter = (d & m_bits).bit_count()
            new_score = inter / (m_pop + d.bit_count() - inter)
            if new_score > best_score:
                best_score = new_score
                best_id = k
        if best_id < 0:
            break  # nothing intersects the concept at all
        candidates.remove(best_id)
        if best_score - score > cfg.delta:
            score = best_score
            covered |= planes[best_id]
            selected.append(best_id)
            trace.append(best_score)
        else:
            break

    combined = Bitmask._from_int(concept_mask.width, concept_mask.height, covered)
    return RecognitionResult(
        concept_name=concept_name,
        image_id=image_id,
        selected_maps=selected,
        score=trace[-1] if trace else 0.0,
        score_trace=trace,
        combined_mask=combined,
    )


def exhaustive_best_subset(
    stack: FeatureMapStack, concept_mask: Bitmask, max_size: int
) -> tuple[list[int], float]:
    """Enumerate every subset of up to ``max_size`` maps and return the best.

    Validation oracle only: refuses stacks larger than
    ``EXHAUSTIVE_MAX_STACK`` maps. Ties go to the lexicographically smallest
    id set (the empty set wins a tie at score 0).
    """
    _check_concept(concept_mask)
    _check_stack_shape(stack, concept_mask)
    n = len(stack.masks)
    if n > EXHAUSTIVE_MAX_STACK:
        raise OracleSizeError(
            f"{n} maps exceeds the enumeration guard of {EXHAUSTIVE_MAX_STACK}"
        )
    if max_size < 0:
        raise ValueError(f"max_size must be >= 0, got {max_size}")

    m_bits = concept_mask._bits
    m_pop = concept_mask.popcount
    planes = [m._bits for m in stack.masks]

    unions = [0] * (1 << n)
    best_score = 0.0
    best_subset = 0
    for s in range(1, 1 << n):
        low = (s & -s).bit_length() - 1
        u = unions[s & (s - 1)] | planes[low]
        unions[s] = u
        if s.bit_count() > max_size:
            continue
        inter = (u & m_bits).bit_count()
        score = inter / (m_pop + u.bit_count() - inter)
        if score > best_score:
            best_score = score
            best_subset = s
        elif score == best_score and _subset_ids(s) < _subset_ids(best_subset):
            best_subset = s
    return list(_subset_ids(best_subset)), best_score


def _subset_ids(s: int) -> tuple[int, ...]:
    ids = []
    i = 0
    while s:
        if s & 1:
            ids.append(i)
        s >>= 1
        i += 1
    return tuple(ids)
