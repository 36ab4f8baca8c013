"""Shared fixtures and independent reference implementations.

The reference code here deliberately avoids the library's packed-int path:
counts use per-pixel Python loops, greedy uses coordinate sets, so the tests
check the fast implementations against genuinely independent logic.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from hypothesis import strategies as st

from conceptcover.bitmask import Bitmask
from conceptcover.ingest import (
    DatasetManifest,
    FeatureMapStack,
    ImageRecord,
    SceneClass,
    save_bitmask,
    save_feature_stack,
    save_manifest,
)


def naive_counts(a: np.ndarray, b: np.ndarray) -> tuple[int, int]:
    """Per-pixel loop |a & b| and |a | b| over two boolean arrays."""
    inter = union = 0
    for r in range(a.shape[0]):
        for c in range(a.shape[1]):
            x = bool(a[r][c])
            y = bool(b[r][c])
            if x and y:
                inter += 1
            if x or y:
                union += 1
    return inter, union


def mask_pixels(mask: Bitmask) -> set[tuple[int, int]]:
    arr = mask.to_array()
    return {(r, c) for r in range(mask.height) for c in range(mask.width) if arr[r][c]}


def reference_greedy(
    planes: list[set[tuple[int, int]]],
    concept: set[tuple[int, int]],
    delta: float,
    max_maps: int | None = None,
) -> tuple[list[int], float, list[float]]:
    """Step-by-step exhaustive-argmax greedy over coordinate sets."""
    candidates = list(range(len(planes)))
    covered: set[tuple[int, int]] = set()
    chosen: list[int] = []
    trace: list[float] = []
    score = 0.0
    while candidates and (max_maps is None or len(chosen) < max_maps):
        best_score = 0.0
        best = None
        for k in candidates:
            d = covered | planes[k]
            new_score = len(concept & d) / len(concept | d)
            if new_score > best_score:
                best_score = new_score
                best = k
        if best is None:
            break
        candidates.remove(best)
        if best_score - score > delta:
            score = best_score
            covered |= planes[best]
            chosen.append(best)
            trace.append(best_score)
        else:
            break
    return chosen, score, trace


def random_mask(rng: np.random.Generator, width: int, height: int,
                density: float) -> Bitmask:
    return Bitmask.from_array(rng.random((height, width)) < density)


@st.composite
def bitmasks(draw, shape=None, max_side=16):
    if shape is None:
        width = draw(st.integers(1, max_side))
        height = draw(st.integers(1, max_side))
    else:
        width, height = shape
    payload = ((width + 7) // 8) * height
    return Bitmask(width, height, draw(st.binary(min_size=payload, max_size=payload)))


@st.composite
def bitmask_pairs(draw, max_side=16):
    width = draw(st.integers(1, max_side))
    height = draw(st.integers(1, max_side))
    shape = (width, height)
    return draw(bitmasks(shape=shape)), draw(bitmasks(shape=shape))


def build_tiny_dataset(root: Path, feature_maps: int = 3, side: int = 8,
                       seed: int = 7) -> Path:
    """Write a small valid two-scene dataset; returns the manifest path.

    Scene 0 has two images with concepts {blob, edge}; scene 1 has two images
    with concept {blob}. Feature maps are random planes plus one exact copy of
    each image's blob mask (map 0), so greedy always finds something.
    """
    rng = np.random.default_rng(seed)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    (root / "stacks").mkdir(exist_ok=True)
    records = []
    for scene, n_concepts in [(0, 2), (1, 1)]:
        for idx in range(2):
            image_id = f"s{scene}_i{idx}"
            blob = random_mask(rng, side, side, 0.3)
            while blob.is_empty:
                blob = random_mask(rng, side, side, 0.3)
            masks = {"blob": blob}
            if n_concepts > 1:
                masks["edge"] = Bitmask.from_pixels(side, side, [(0, c) for c in range(side)])
            mask_paths = {}
            (root / "masks" / image_id).mkdir(exist_ok=True)
            for concept, mask in masks.items():
                rel = f"masks/{image_id}/{concept}.cmask"
                save_bitmask(root / rel, mask)
                mask_paths[concept] = rel
            planes = [blob] + [random_mask(rng, side, side, 0.2)
                               for _ in range(feature_maps - 1)]
            stack_rel = f"stacks/{image_id}.cstk"
            save_feature_stack(root / stack_rel, FeatureMapStack(side, side, planes))
            records.append(ImageRecord(
                image_id=image_id,
                scene_label=scene,
                predicted_label=scene if idx == 0 else (scene + 1) % 2,
                concept_masks=mask_paths,
                feature_stack_path=stack_rel,
            ))
    manifest = DatasetManifest(
        scene_classes=[SceneClass(0, "alpha_room"), SceneClass(1, "beta_room")],
        images=records,
        layer_feature_map_count=feature_maps,
        base_dir=root,
    )
    save_manifest(root / "manifest.json", manifest)
    return root / "manifest.json"
