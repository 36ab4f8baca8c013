"""Dataset-level statistics over recognition results.

Aggregates (image, concept) recognition scores into per-scene and per-concept
tables, classifies concepts by uniqueness/popularity thresholds, and runs the
(alpha, beta) correlation sweep against per-scene classifier accuracy.

Conventions: a concept "appears" in a scene class when it occurs in at least
one of that scene's sampled images; popularity is occurrences / images sampled
in the scene; uniqueness is 1 - (scenes present / total scenes). Threshold
comparisons are strict (P > beta, U > alpha). Per-scene threshold scores are
instance-level means: every scored (image, concept) occurrence of a qualifying
concept counts once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import CoverageError, EmptySceneError, ZeroVarianceError
from .ingest import DatasetManifest
from .stats import linear_fit, pearson

_CORR_MIN_SCENES = 2


# ---------------------------------------------------------------------------
# formulas

def popularity(occurrence_count: int, images_sampled: int) -> float:
    """Fraction of a scene's sampled images containing the concept."""
    if images_sampled <= 0:
        raise ValueError("images_sampled must be positive")
    if not 0 <= occurrence_count <= images_sampled:
        raise ValueError(
            f"occurrence_count {occurrence_count} outside [0, {images_sampled}]"
        )
    return occurrence_count / images_sampled


def uniqueness(scene_presence_count: int, total_scene_classes: int) -> float:
    """1 minus the fraction of scene classes the concept appears in."""
    if scene_presence_count < 1:
        raise ValueError("a concept must appear in at least one scene class")
    if scene_presence_count > total_scene_classes:
        raise ValueError(
            f"presence {scene_presence_count} exceeds {total_scene_classes} classes"
        )
    return 1.0 - scene_presence_count / total_scene_classes


def synthesized_score(s_unique: float, s_mislead: float) -> float:
    """Combine unique and misleading recognition means for one scene."""
    return (s_unique + 1.0 - s_mislead) / 2.0


def scene_accuracy(manifest: DatasetManifest) -> dict[int, float]:
    """Per-scene fraction of correct top-1 predictions."""
    result = {}
    for label, recs in sorted(manifest.images_by_scene().items()):
        if not recs:
            raise EmptySceneError(f"scene {label} has no images")
        correct = sum(1 for r in recs if r.predicted_label == r.scene_label)
        result[label] = correct / len(recs)
    return result


def threshold_grid(start: float = 0.0, stop: float = 1.0, step: float = 0.05) -> list[float]:
    """Inclusive threshold values from start to stop, rounded for clean CSV."""
    if step <= 0:
        raise ValueError("step must be positive")
    if stop < start:
        raise ValueError("stop must be >= start")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 10) for i in range(n + 1)]


# ---------------------------------------------------------------------------
# result tables

@dataclass(frozen=True)
class ScoredInstance:
    """One successfully scored (image, concept) recognition outcome."""

    image_id: str
    scene_label: int
    concept: str
    score: float


@dataclass(frozen=True)
class ConceptSceneStats:
    concept_name: str
    scene_label: int
    occurrence_count: int
    mean_score: float | None
    popularity: float


@dataclass(frozen=True)
class ConceptGlobalStats:
    concept_name: str
    scene_presence_count: int
    uniqueness: float


@dataclass(frozen=True)
class SceneReport:
    scene_label: int
    accuracy: float
    mean_recognition: float | None
    slope: float | None
    s_unique: float | None = None
    s_mislead: float | None = None
    s_syn: float | None = None


@dataclass(frozen=True)
class ConceptPartition:
    unique: tuple[str, ...]
    misleading: tuple[str, ...]
    excluded: tuple[str, ...]


@dataclass(frozen=True)
class SweepCell:
    alpha: float
    beta: float
    rho_unique: float | None
    rho_mislead: float | None
    rho_syn: float | None
    p_unique: float | None
    p_mislead: float | None
    scenes_counted: int


class _SceneConceptAgg:
    __slots__ = ("occurrences", "score_sum", "score_count")

    def __init__(self, occurrences: int):
        self.occurrences = occurrences
        self.score_sum = 0.0
        self.score_count = 0

    @property
    def mean(self) -> float | None:
        if self.score_count == 0:
            return None
        return self.score_sum / self.score_count


class RecognitionAnalysis:
    """Precomputed aggregates binding a manifest to its recognition scores.

    ``unscored`` names (image_id, concept) instances that produced error
    records instead of scores; they count toward coverage but are excluded
    from every score aggregate.
    """

    def __init__(
        self,
        manifest: DatasetManifest,
        instances: Sequence[ScoredInstance],
        unscored: Iterable[tuple[str, str]] = (),
    ):
        self.manifest = manifest
        self._check_coverage(manifest, instances, set(unscored))

        self.scene_labels = sorted(sc.label for sc in manifest.scene_classes)
        self.images_per_scene = {
            label: len(recs) for label, recs in manifest.images_by_scene().items()
        }

        # Occurrences come from the manifest; scores from the instances.
        self._agg: dict[tuple[int, str], _SceneConceptAgg] = {}
        self._concept_scenes: dict[str, set[int]] = {}
        for rec in manifest.images:
            for concept in rec.concept_masks:
                key = (rec.scene_label, concept)
                if key not in self._agg:
                    self._agg[key] = _SceneConceptAgg(0)
                self._agg[key].occurrences += 1
                self._concept_scenes.setdefault(concept, set()).add(rec.scene_label)

        self._scene_score_sum = {label: 0.0 for label in self.scene_labels}
        self._scene_score_count = {label: 0 for label in self.scene_labels}
        self.all_scores: list[float] = []
        for inst in instances:
            agg = self._agg[(inst.scene_label, inst.concept)]
            agg.score_sum += inst.score
            agg.score_count += 1
            self._scene_score_sum[inst.scene_label] += inst.score
            self._scene_score_count[inst.scene_label] += 1
            self.all_scores.append(inst.score)

        self.accuracy = scene_accuracy(manifest)

    @staticmethod
    def _check_coverage(manifest, instances, unscored) -> None:
        expected = {
            (rec.image_id, concept)
            for rec in manifest.images
            for concept in rec.concept_masks
        }
        seen: set[tuple[str, str]] = set(unscored)
        id_to_scene = {rec.image_id: rec.scene_label for rec in manifest.images}
        for inst in instances:
            key = (inst.image_id, inst.concept)
            if key not in expected:
                raise CoverageError(f"record for unknown instance {key}")
            if key in seen:
                raise CoverageError(f"duplicate record for instance {key}")
            if id_to_scene[inst.image_id] != inst.scene_label:
                raise CoverageError(
                    f"record for {key} carries scene {inst.scene_label}, "
                    f"manifest says {id_to_scene[inst.image_id]}"
                )
            seen.add(key)
        missing = sorted(expected - seen)
        if missing:
            shown = ", ".join(f"{i}/{c}" for i, c in missing[:10])
            more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
            raise CoverageError(f"missing recognition records: {shown}{more}")

    # -- tables --------------------------------------------------------------

    def concept_scene_stats(self) -> list[ConceptSceneStats]:
        rows = []
        for (scene, concept), agg in sorted(self._agg.items()):
            rows.append(ConceptSceneStats(
                concept_name=concept,
                scene_label=scene,
                occurrence_count=agg.occurrences,
                mean_score=agg.mean,
                popularity=popularity(agg.occurrences, self.images_per_scene[scene]),
            ))
        return rows

    def concept_global_stats(self) -> list[ConceptGlobalStats]:
        total = len(self.scene_labels)
        return [
            ConceptGlobalStats(concept, len(scenes), uniqueness(len(scenes), total))
            for concept, scenes in sorted(self._concept_scenes.items())
        ]

    def mean_recognition(self, scene: int) -> float | None:
        count = self._scene_score_count[scene]
        if count == 0:
            return None
        return self._scene_score_sum[scene] / count

    def scene_slope(self, scene: int) -> float | None:
        """Slope of the occurrences-vs-mean-score fit for one scene.

        Points are per concept: x = mean recognition score, y = occurrence
        count. None when fewer than 2 scored concepts or x is constant.
        """
        xs, ys = [], []
        for (s, _concept), agg in sorted(self._agg.items()):
            if s == scene and agg.score_count > 0:
                xs.append(agg.mean)
                ys.append(float(agg.occurrences))
        if len(xs) < 2:
            return None
        try:
            return linear_fit(xs, ys).slope
        except ZeroVarianceError:
            return None

    # -- thresholding ----------------------------------------------------------

    def _uniqueness_by_concept(self) -> dict[str, float]:
        total = len(self.scene_labels)
        return {
            concept: uniqueness(len(scenes), total)
            for concept, scenes in self._concept_scenes.items()
        }

    def classify_concepts(self, alpha: float, beta: float) -> dict[int, ConceptPartition]:
        """Partition each scene's concepts into unique/misleading/excluded."""
        if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
            raise ValueError("alpha and beta must lie in [0, 1]")
        uniq = self._uniqueness_by_concept()
        per_scene: dict[int, dict[str, list[str]]] = {
            label: {"unique": [], "misleading": [], "excluded": []}
            for label in self.scene_labels
        }
        for (scene, concept), agg in sorted(self._agg.items()):
            pop = agg.occurrences / self.images_per_scene[scene]
            if pop > beta:
                kind = "unique" if uniq[concept] > alpha else "misleading"
            else:
                kind = "excluded"
            per_scene[scene][kind].append(concept)
        return {
            label: ConceptPartition(
                tuple(groups["unique"]), tuple(groups["misleading"]), tuple(groups["excluded"])
            )
            for label, groups in per_scene.items()
        }

    def threshold_scores(
        self, alpha: float, beta: float
    ) -> dict[int, tuple[float | None, float | None, float | None]]:
        """Per-scene (s_unique, s_mislead, s_syn) at one threshold pair."""
        partitions = self.classify_concepts(alpha, beta)
        out = {}
        for scene in self.scene_labels:
            part = partitions[scene]
            s_u = self._instance_mean(scene, part.unique)
            s_m = self._instance_mean(scene, part.misleading)
            s_syn = synthesized_score(s_u, s_m) if s_u is not None and s_m is not None else None
            out[scene] = (s_u, s_m, s_syn)
        return out

    def _instance_mean(self, scene: int, concepts: tuple[str, ...]) -> float | None:
        total = 0.0
        count = 0
        for concept in concepts:
            agg = self._agg[(scene, concept)]
            total += agg.score_sum
            count += agg.score_count
        if count == 0:
            return None
        return total / count

    # -- reports ---------------------------------------------------------------

    def scene_reports(
        self, alpha: float | None = None, beta: float | None = None
    ) -> list[SceneReport]:
        thresholded = None
        if alpha is not None and beta is not None:
            thresholded = self.threshold_scores(alpha, beta)
        reports = []
        for scene in self.scene_labels:
            s_u = s_m = s_syn = None
            if thresholded is not None:
                s_u, s_m, s_syn = thresholded[scene]
            reports.append(SceneReport(
                scene_label=scene,
                accuracy=self.accuracy[scene],
                mean_recognition=self.mean_recognition(scene),
                slope=self.scene_slope(scene),
                s_unique=s_u,
                s_mislead=s_m,
                s_syn=s_syn,
            ))
        return reports

    # -- sweep -----------------------------------------------------------------

    def sweep(self, alphas: Sequence[float], betas: Sequence[float]) -> list[SweepCell]:
        """Correlation grid: one cell per (alpha, beta), scan order alpha-major."""
        acc = self.accuracy
        cells = []
        for alpha in alphas:
            for beta in betas:
                scores = self.threshold_scores(alpha, beta)
                scenes_counted = sum(
                    1 for scene in self.scene_labels
                    if any(v is not None for v in scores[scene][:2])
                )
                rho_u, p_u = _cell_correlation(
                    [(scores[s][0], acc[s]) for s in self.scene_labels]
                )
                rho_m, p_m = _cell_correlation(
                    [(scores[s][1], acc[s]) for s in self.scene_labels]
                )
                rho_syn, _ = _cell_correlation(
                    [(scores[s][2], acc[s]) for s in self.scene_labels]
                )
                cells.append(SweepCell(
                    alpha=alpha, beta=beta,
                    rho_unique=rho_u, rho_mislead=rho_m, rho_syn=rho_syn,
                    p_unique=p_u, p_mislead=p_m,
                    scenes_counted=scenes_counted,
                ))
        return cells


def _cell_correlation(
    pairs: list[tuple[float | None, float]]
) -> tuple[float | None, float | None]:
    """Pearson over the defined pairs; (None, None) for degenerate cells.

    Cells degrade to null below 2 defined scenes or at zero variance. With
    exactly 2 scenes rho is +/-1 by construction and no p-value is emitted
    (the t test needs n >= 3).
    """
    defined = [(x, y) for x, y in pairs if x is not None]
    if len(defined) < _CORR_MIN_SCENES:
        return None, None
    xs = [x for x, _ in defined]
    ys = [y for _, y in defined]
    if min(xs) == max(xs) or min(ys) == max(ys):
        return None, None
    if len(defined) == 2:
        rho = 1.0 if (xs[1] - xs[0]) * (ys[1] - ys[0]) > 0 else -1.0
        return rho, None
    result = pearson(xs, ys)
    return result.rho, result.p_two_sided
