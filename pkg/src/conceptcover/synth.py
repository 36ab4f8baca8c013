"""Deterministic synthetic datasets with planted, analytically known structure.

Planting recipe, per concept and image: the concept mask is a fixed number of
pixels m (one global size derived from the plan's pixel budget), partitioned
into k disjoint fragments; each fragment becomes one feature-map plane
together with a calibrated share of off-concept noise pixels, so the best
achievable coverage score is m / (m + noise_total) by construction. Noise and
masks are drawn from a per-image pixel pool without overlap, which keeps every
concept's greedy run independent of every other concept's planes. Quality 0
concepts get pure-noise planes (no overlap at all). All randomness comes from
one counter-based Philox stream keyed by the spec seed, consumed in a fixed
documented order, so equal seeds give byte-identical datasets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bitmask import Bitmask
from .errors import SynthSpecError
from .ingest import (
    DatasetManifest,
    FeatureMapStack,
    ImageRecord,
    SceneClass,
    save_bitmask,
    save_feature_stack,
    save_manifest,
)

PIXEL_BUDGET_FRACTION = 0.85
MIN_MASK_PIXELS = 8
FILLER_PIXELS = 4


@dataclass(frozen=True)
class ConceptPlan:
    name: str
    target_popularity: float
    scene_subset: tuple[int, ...]
    quality: float


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    num_scenes: int
    images_per_scene: int
    feature_maps: int
    width: int
    height: int
    concept_plan: tuple[ConceptPlan, ...]
    accuracy_plan: tuple[float, ...]


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _split_desc(total: int, parts: int) -> list[int]:
    """Near-equal split, largest first."""
    base, rem = divmod(total, parts)
    return [base + 1] * rem + [base] * (parts - rem)


def validate_spec(spec: SynthSpec) -> None:
    for name, value in [("num_scenes", spec.num_scenes),
                        ("images_per_scene", spec.images_per_scene),
                        ("feature_maps", spec.feature_maps),
                        ("width", spec.width), ("height", spec.height)]:
        if value <= 0:
            raise SynthSpecError(f"{name} must be positive, got {value}")
    if not 0 <= spec.seed < 2 ** 64:
        raise SynthSpecError("seed must be a 64-bit unsigned integer")
    if len(spec.accuracy_plan) != spec.num_scenes:
        raise SynthSpecError(
            f"accuracy_plan has {len(spec.accuracy_plan)} entries for "
            f"{spec.num_scenes} scenes"
        )
    for scene, acc in enumerate(spec.accuracy_plan):
        if not 0.0 <= acc <= 1.0:
            raise SynthSpecError(f"scene {scene} accuracy {acc} outside [0, 1]")
        correct = _round_half_up(acc * spec.images_per_scene)
        if correct < spec.images_per_scene and spec.num_scenes == 1:
            raise SynthSpecError(
                "cannot plant wrong predictions with a single scene class"
            )
    seen = set()
    for plan in spec.concept_plan:
        if not plan.name:
            raise SynthSpecError("concept names must be nonempty")
        if plan.name in seen:
            raise SynthSpecError(f"duplicate concept {plan.name!r}")
        seen.add(plan.name)
        if not 0.0 <= plan.quality <= 1.0:
            raise SynthSpecError(f"{plan.name}: quality {plan.quality} outside [0, 1]")
        if not 0.0 <= plan.target_popularity <= 1.0:
            raise SynthSpecError(
                f"{plan.name}: popularity {plan.target_popularity} outside [0, 1]"
            )
        if not plan.scene_subset:
            raise SynthSpecError(f"{plan.name}: scene subset is empty")
        for scene in plan.scene_subset:
            if not 0 <= scene < spec.num_scenes:
                raise SynthSpecError(f"{plan.name}: unknown scene {scene}")
        if len(set(plan.scene_subset)) != len(plan.scene_subset):
            raise SynthSpecError(f"{plan.name}: repeated scenes in subset")
        if planned_occurrences(spec, plan) < 1:
            raise SynthSpecError(
                f"{plan.name}: popularity {plan.target_popularity} rounds to zero "
                f"occurrences over {spec.images_per_scene} images"
            )
    if spec.concept_plan:
        mask_px, fragments = planted_geometry(spec)
        if mask_px < MIN_MASK_PIXELS:
            raise SynthSpecError(
                f"plan infeasible: pixel budget leaves {mask_px} px per concept "
                f"mask (need >= {MIN_MASK_PIXELS})"
            )
        worst_concepts = max(
            sum(1 for p in spec.concept_plan if scene in p.scene_subset)
            for scene in range(spec.num_scenes)
        )
        if worst_concepts * fragments > spec.feature_maps:
            raise SynthSpecError(
                f"plan infeasible: up to {worst_concepts} concepts x {fragments} "
                f"planes exceeds {spec.feature_maps} feature maps"
            )


def planned_occurrences(spec: SynthSpec, plan: ConceptPlan) -> int:
    """Images per scene that carry the concept (deterministic rounding)."""
    return min(spec.images_per_scene,
               _round_half_up(plan.target_popularity * spec.images_per_scene))


def _pixel_cost(quality: float) -> float:
    # mask + noise pixels per unit of mask size; q=0 plants equal pure noise
    return 1.0 / quality if quality > 0 else 2.0


def planted_geometry(spec: SynthSpec) -> tuple[int, int]:
    """(mask pixel count, fragments per concept) derived from the plan."""
    worst_cost = max(
        (
            sum(_pixel_cost(p.quality) for p in spec.concept_plan
                if scene in p.scene_subset)
            for scene in range(spec.num_scenes)
        ),
        default=0.0,
    )
    frame = spec.width * spec.height
    if worst_cost == 0.0:
        mask_px = frame // 4
    else:
        mask_px = int(PIXEL_BUDGET_FRACTION * frame / worst_cost)
    fragments = 3 if mask_px >= 24 else 2 if mask_px >= MIN_MASK_PIXELS else 1
    return mask_px, fragments


def _plane_layout(quality: float, mask_px: int, fragments: int) -> list[tuple[int, int]]:
    """Per-plane (concept pixels, noise pixels) for one planted concept."""
    if quality <= 0.0:
        return [(0, max(1, mask_px // fragments))] * fragments
    noise_total = _round_half_up(mask_px * (1.0 - quality) / quality)
    return list(zip(_split_desc(mask_px, fragments), _split_desc(noise_total, fragments)))


def simulate_greedy_score(layout: list[tuple[int, int]], mask_px: int,
                          delta: float = 0.01) -> float:
    """Greedy outcome over planted planes, mirroring the real selection rule."""
    candidates = list(range(len(layout)))
    covered_f = covered_v = 0
    score = 0.0
    while candidates:
        best_score = 0.0
        best = -1
        for k in candidates:
            f, v = layout[k]
            new_score = (covered_f + f) / (mask_px + covered_v + v)
            if new_score > best_score:
                best_score = new_score
                best = k
        if best < 0:
            break
        candidates.remove(best)
        if best_score - score > delta:
            score = best_score
            covered_f += layout[best][0]
            covered_v += layout[best][1]
        else:
            break
    return score


def expected_concept_scores(spec: SynthSpec, delta: float = 0.01) -> dict[str, float]:
    """Closed-form greedy score for each planted concept.

    The construction makes this exact: every image plants the same fragment
    and noise counts, so the pipeline's greedy run lands on the same score
    for every occurrence.
    """
    mask_px, fragments = planted_geometry(spec)
    return {
        plan.name: simulate_greedy_score(
            _plane_layout(plan.quality, mask_px, fragments), mask_px, delta
        )
        for plan in spec.concept_plan
    }


def expected_scene_means(spec: SynthSpec, delta: float = 0.01) -> dict[int, float | None]:
    """Expected instance-level mean recognition per scene under the plan."""
    scores = expected_concept_scores(spec, delta)
    means: dict[int, float | None] = {}
    for scene in range(spec.num_scenes):
        total = 0.0
        count = 0
        for plan in spec.concept_plan:
            if scene in plan.scene_subset:
                occ = planned_occurrences(spec, plan)
                total += occ * scores[plan.name]
                count += occ
        means[scene] = total / count if count else None
    return means


# ---------------------------------------------------------------------------
# generation

def generate(spec: SynthSpec, out_dir: Path | str) -> DatasetManifest:
    """Write a complete dataset (manifest + cmask/cstk files) to ``out_dir``.

    RNG consumption order (one Philox stream keyed by the seed): first one
    permutation per (concept, scene in subset) choosing which images carry the
    concept, then one pixel permutation per image in (scene, index) order.
    """
    validate_spec(spec)
    out_dir = Path(out_dir)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    (out_dir / "stacks").mkdir(parents=True, exist_ok=True)

    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    n_img = spec.images_per_scene
    mask_px, fragments = planted_geometry(spec) if spec.concept_plan else (0, 1)

    presence: dict[tuple[str, int], set[int]] = {}
    for plan in spec.concept_plan:
        occ = planned_occurrences(spec, plan)
        for scene in sorted(plan.scene_subset):
            chosen = rng.permutation(n_img)[:occ]
            presence[(plan.name, scene)] = set(int(i) for i in chosen)

    records = []
    frame = spec.width * spec.height
    for scene in range(spec.num_scenes):
        correct = _round_half_up(spec.accuracy_plan[scene] * n_img)
        for idx in range(n_img):
            image_id = f"s{scene:02d}_i{idx:03d}"
            present = [
                plan for plan in spec.concept_plan
                if scene in plan.scene_subset and idx in presence[(plan.name, scene)]
            ]
            pool = rng.permutation(frame)
            cursor = 0

            def take(count: int) -> np.ndarray:
                nonlocal cursor
                if cursor + count > frame:
                    raise SynthSpecError(
                        f"{image_id}: pixel pool exhausted "
                        f"(needed {count}, {frame - cursor} left)"
                    )
                out = pool[cursor:cursor + count]
                cursor += count
                return out

            planes = []
            mask_paths = {}
            for plan in present:
                mask_idx = take(mask_px)
                mask = _mask_from_indices(spec, mask_idx)
                rel = f"masks/{image_id}/{plan.name}.cmask"
                (out_dir / "masks" / image_id).mkdir(exist_ok=True)
                save_bitmask(out_dir / rel, mask)
                mask_paths[plan.name] = rel

                layout = _plane_layout(plan.quality, mask_px, fragments)
                offset = 0
                for f_px, v_px in layout:
                    frag = mask_idx[offset:offset + f_px]
                    offset += f_px
                    noise = take(v_px)
                    planes.append(_mask_from_indices(spec, np.concatenate([frag, noise])))

            while len(planes) < spec.feature_maps:
                filler = min(FILLER_PIXELS, frame - cursor)
                planes.append(_mask_from_indices(spec, take(filler)))

            stack = FeatureMapStack(spec.width, spec.height, planes)
            stack_rel = f"stacks/{image_id}.cstk"
            save_feature_stack(out_dir / stack_rel, stack)

            records.append(ImageRecord(
                image_id=image_id,
                scene_label=scene,
                predicted_label=scene if idx < correct else (scene + 1) % spec.num_scenes,
                concept_masks=mask_paths,
                feature_stack_path=stack_rel,
            ))

    manifest = DatasetManifest(
        scene_classes=[SceneClass(s, f"scene_{s:02d}") for s in range(spec.num_scenes)],
        images=records,
        layer_feature_map_count=spec.feature_maps,
        base_dir=out_dir,
    )
    save_manifest(out_dir / "manifest.json", manifest)
    return manifest


def _mask_from_indices(spec: SynthSpec, indices: np.ndarray) -> Bitmask:
    flat = np.zeros(spec.width * spec.height, dtype=bool)
    flat[indices] = True
    return Bitmask.from_array(flat.reshape(spec.height, spec.width))


# ---------------------------------------------------------------------------
# JSON spec files

def spec_from_dict(raw: dict) -> SynthSpec:
    try:
        concepts = tuple(
            ConceptPlan(
                name=str(c["name"]),
                target_popularity=float(c["popularity"]),
                scene_subset=tuple(int(s) for s in c["scenes"]),
                quality=float(c["quality"]),
            )
            for c in raw.get("concepts", [])
        )
        spec = SynthSpec(
            seed=int(raw["seed"]),
            num_scenes=int(raw["num_scenes"]),
            images_per_scene=int(raw["images_per_scene"]),
            feature_maps=int(raw["feature_maps"]),
            width=int(raw["width"]),
            height=int(raw["height"]),
            concept_plan=concepts,
            accuracy_plan=tuple(float(a) for a in raw["accuracy"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SynthSpecError(f"malformed synth spec: {exc}") from exc
    validate_spec(spec)
    return spec


def load_synth_spec(path: Path | str) -> SynthSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SynthSpecError(f"{path}: {exc}") from exc
    return spec_from_dict(raw)
