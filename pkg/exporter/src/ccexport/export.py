"""Export orchestration: images + segmentations -> conceptcover dataset.

Config JSON (paths relative to the config file)::

    {
      "model": {"name": "tiny", "seed": 7, "channels": [8, 16]},
      "epsilon": 0.0,
      "scene_classes": [{"label": 0, "name": "bathroom"}, ...],
      "images": [
        {"image_id": "a", "path": "imgs/a.pgm", "scene_label": 0,
         "masks": {"wall": "seg/a_wall.pgm"}}
      ]
    }

Images without usable segmentation are skipped with a warning and listed in
export_report.json; everything that is written passes the analysis toolkit's
ingest validation by construction.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .deconv import deconv_plane, forward_features, predict_label
from .formats import write_cmsk, write_cstk, write_manifest
from .model import ModelBundle, build_model

log = logging.getLogger("ccexport")


@dataclass
class ImageSpec:
    image_id: str
    path: str
    scene_label: int
    masks: dict[str, str]


@dataclass
class ExportConfig:
    model: dict
    epsilon: float
    scene_classes: list[tuple[int, str]]
    images: list[ImageSpec]
    base_dir: Path = field(default_factory=Path)

    def resolve(self, relpath: str) -> Path:
        return self.base_dir / relpath


def load_config(path: Path | str) -> ExportConfig:
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    epsilon = float(raw.get("epsilon", 0.0))
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    scene_classes = [(int(c["label"]), str(c["name"])) for c in raw["scene_classes"]]
    labels = [label for label, _ in scene_classes]
    if sorted(labels) != list(range(len(labels))):
        raise ValueError("scene labels must be unique and contiguous from 0")
    images = [
        ImageSpec(
            image_id=str(entry["image_id"]),
            path=str(entry["path"]),
            scene_label=int(entry["scene_label"]),
            masks={str(k): str(v) for k, v in entry.get("masks", {}).items()},
        )
        for entry in raw["images"]
    ]
    for spec in images:
        if spec.scene_label not in labels:
            raise ValueError(f"{spec.image_id}: unknown scene label {spec.scene_label}")
    return ExportConfig(
        model=raw.get("model", {}),
        epsilon=epsilon,
        scene_classes=scene_classes,
        images=images,
        base_dir=path.parent,
    )


def load_image(path: Path, in_channels: int) -> np.ndarray:
    """(C, H, W) float64 array scaled to [0, 1]."""
    with Image.open(path) as img:
        img = img.convert("L" if in_channels == 1 else "RGB")
        arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[None, :, :]
    else:
        arr = arr.transpose(2, 0, 1)
    return arr


def load_mask(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L")) > 0


def export_image(bundle: ModelBundle, image: np.ndarray, epsilon: float):
    """(planes, predicted_label) for one image array."""
    x = torch.from_numpy(image[None]).double()
    activation, trace = forward_features(bundle.feature_layers, x)
    planes = np.stack([
        deconv_plane(trace, activation, m) > epsilon
        for m in range(bundle.feature_maps)
    ])
    return planes, predict_label(bundle.head, activation)


def export(config: ExportConfig, out_dir: Path | str) -> dict:
    """Run the model over every listed image and write a full dataset."""
    out_dir = Path(out_dir)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    (out_dir / "stacks").mkdir(exist_ok=True)

    bundle = build_model(config.model, num_classes=len(config.scene_classes))
    records = []
    skipped = []

    for spec in sorted(config.images, key=lambda s: (s.scene_label, s.image_id)):
        if not spec.masks:
            log.warning("%s: no segmentation, skipping", spec.image_id)
            skipped.append({"image_id": spec.image_id, "reason": "no-segmentation"})
            continue
        image = load_image(config.resolve(spec.path), bundle.in_channels)
        height, width = image.shape[1:]

        masks = {}
        reason = None
        for concept, rel in sorted(spec.masks.items()):
            mask_path = config.resolve(rel)
            if not mask_path.is_file():
                reason = f"missing segmentation file for {concept!r}"
                break
            bits = load_mask(mask_path)
            if bits.shape != (height, width):
                reason = (f"segmentation for {concept!r} is {bits.shape[1]}x"
                          f"{bits.shape[0]}, image is {width}x{height}")
                break
            masks[concept] = bits
        if reason is not None:
            log.warning("%s: %s, skipping", spec.image_id, reason)
            skipped.append({"image_id": spec.image_id, "reason": reason})
            continue

        planes, predicted = export_image(bundle, image, config.epsilon)

        (out_dir / "masks" / spec.image_id).mkdir(exist_ok=True)
        mask_paths = {}
        for concept, bits in masks.items():
            rel = f"masks/{spec.image_id}/{concept}.cmask"
            write_cmsk(out_dir / rel, bits)
            mask_paths[concept] = rel
        stack_rel = f"stacks/{spec.image_id}.cstk"
        write_cstk(out_dir / stack_rel, planes)

        records.append({
            "image_id": spec.image_id,
            "scene_label": spec.scene_label,
            "predicted_label": predicted,
            "concept_masks": mask_paths,
            "feature_stack_path": stack_rel,
        })

    write_manifest(out_dir / "manifest.json", config.scene_classes, records,
                   bundle.feature_maps)
    report = {
        "exported": len(records),
        "skipped": skipped,
        "epsilon": config.epsilon,
        "feature_maps": bundle.feature_maps,
    }
    (out_dir / "export_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return report
