"""Dataset loading and the on-disk formats.

Binary formats (all integers little-endian u32, bit-packed planes exactly as
in :mod:`conceptcover.bitmask`: row-major, rows padded to whole bytes, MSB
first within each byte, padding bits zero):

* CMSK  -- single mask:   magic ``CMSK``, version byte 0x01, width, height,
  then ``row_bytes * height`` payload bytes.
* CSTK  -- mask stack:    magic ``CSTK``, version byte 0x01, plane count,
  width, height, then ``count`` planes, each a CMSK-style payload.
* PGM   -- import only:   binary P5 with maxval <= 255; pixels > 0 map to
  set bits.

The manifest is a single JSON document::

    {
      "scene_classes": [{"label": 0, "name": "bathroom"}, ...],
      "layer_feature_map_count": 256,
      "images": [
        {
          "image_id": "s00_i000",
          "scene_label": 0,
          "predicted_label": 3,
          "concept_masks": {"wall": "masks/s00_i000/wall.cmask", ...},
          "feature_stack_path": "stacks/s00_i000.cstk"
        },
        ...
      ]
    }

Paths are POSIX-style, relative to the manifest's directory. Scene labels
must be unique and contiguous from 0; every referenced file must exist, every
stack must carry ``layer_feature_map_count`` planes, and every mask must share
its image's dimensions (defined by the image's feature stack).
"""

from __future__ import annotations

import json
import os
import struct
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .bitmask import Bitmask
from .errors import (
    BadMagicError,
    DanglingReferenceError,
    DimensionMismatchError,
    DuplicateLabelError,
    FeatureCountMismatchError,
    ManifestError,
    ManifestParseError,
    TruncatedPayloadError,
    UnsupportedFormatError,
    ZeroDimensionError,
)

CMSK_MAGIC = b"CMSK"
CSTK_MAGIC = b"CSTK"
FORMAT_VERSION = 1

_CMSK_HEADER = struct.Struct("<4sBII")
_CSTK_HEADER = struct.Struct("<4sBIII")


# ---------------------------------------------------------------------------
# domain model

@dataclass(frozen=True)
class SceneClass:
    label: int
    name: str


@dataclass(frozen=True)
class ImageRecord:
    """One image: ground truth, prediction, and its mask/stack files."""

    image_id: str
    scene_label: int
    predicted_label: int
    concept_masks: dict[str, str]
    feature_stack_path: str


@dataclass
class FeatureMapStack:
    """All candidate feature-map masks for one image at one layer."""

    width: int
    height: int
    masks: list[Bitmask]

    def __post_init__(self):
        if not self.masks:
            raise ValueError("a feature stack needs at least one plane")
        for i, m in enumerate(self.masks):
            if m.width != self.width or m.height != self.height:
                raise ValueError(
                    f"plane {i} is {m.width}x{m.height}, "
                    f"stack is {self.width}x{self.height}"
                )

    def __len__(self) -> int:
        return len(self.masks)


@dataclass
class DatasetManifest:
    scene_classes: list[SceneClass]
    images: list[ImageRecord]
    layer_feature_map_count: int
    base_dir: Path | None = field(default=None, compare=False)

    def scene_name(self, label: int) -> str:
        for sc in self.scene_classes:
            if sc.label == label:
                return sc.name
        raise KeyError(label)

    def scene_labels(self) -> list[int]:
        return [sc.label for sc in self.scene_classes]

    def images_by_scene(self) -> dict[int, list[ImageRecord]]:
        by_scene: dict[int, list[ImageRecord]] = {sc.label: [] for sc in self.scene_classes}
        for rec in self.images:
            by_scene[rec.scene_label].append(rec)
        return by_scene

    def resolve(self, relpath: str) -> Path:
        if self.base_dir is None:
            return Path(relpath)
        return self.base_dir / relpath


# ---------------------------------------------------------------------------
# atomic output

@contextmanager
def atomic_write(path: Path | str, mode: str = "wb") -> Iterator:
    """Write-then-rename so consumers never observe partial files."""
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp.{os.getpid()}")
    try:
        with open(tmp, mode, encoding=None if "b" in mode else "utf-8") as fh:
            yield fh
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


# ---------------------------------------------------------------------------
# CMSK / CSTK

def decode_bitmask(data: bytes, source: str = "<bytes>") -> Bitmask:
    """Decode a CMSK byte string."""
    if data[:4] != CMSK_MAGIC:
        raise BadMagicError(f"{source}: not a CMSK file")
    if len(data) < _CMSK_HEADER.size:
        raise TruncatedPayloadError(f"{source}: CMSK header truncated")
    _, version, width, height = _CMSK_HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise UnsupportedFormatError(f"{source}: CMSK version {version} unsupported")
    if width == 0 or height == 0:
        raise ZeroDimensionError(f"{source}: zero mask dimensions {width}x{height}")
    expected = ((width + 7) // 8) * height
    payload = data[_CMSK_HEADER.size:]
    if len(payload) != expected:
        raise TruncatedPayloadError(
            f"{source}: CMSK payload is {len(payload)} bytes, expected {expected}"
        )
    return Bitmask(width, height, payload)


def encode_bitmask(mask: Bitmask) -> bytes:
    return _CMSK_HEADER.pack(CMSK_MAGIC, FORMAT_VERSION, mask.width, mask.height) + mask.packed


def decode_feature_stack(data: bytes, source: str = "<bytes>") -> FeatureMapStack:
    """Decode a CSTK byte string into an ordered stack of planes."""
    if data[:4] != CSTK_MAGIC:
        raise BadMagicError(f"{source}: not a CSTK file")
    if len(data) < _CSTK_HEADER.size:
        raise TruncatedPayloadError(f"{source}: CSTK header truncated")
    _, version, count, width, height = _CSTK_HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise UnsupportedFormatError(f"{source}: CSTK version {version} unsupported")
    if count == 0 or width == 0 or height == 0:
        raise ZeroDimensionError(
            f"{source}: degenerate CSTK header ({count} planes, {width}x{height})"
        )
    plane_bytes = ((width + 7) // 8) * height
    payload = data[_CSTK_HEADER.size:]
    if len(payload) != count * plane_bytes:
        raise TruncatedPayloadError(
            f"{source}: CSTK payload is {len(payload)} bytes, "
            f"expected {count * plane_bytes}"
        )
    masks = [
        Bitmask(width, height, payload[i * plane_bytes:(i + 1) * plane_bytes])
        for i in range(count)
    ]
    return FeatureMapStack(width, height, masks)


def encode_feature_stack(stack: FeatureMapStack) -> bytes:
    header = _CSTK_HEADER.pack(
        CSTK_MAGIC, FORMAT_VERSION, len(stack.masks), stack.width, stack.height
    )
    return header + b"".join(m.packed for m in stack.masks)


def load_bitmask(path: Path | str) -> Bitmask:
    """Load a mask file, sniffing CMSK vs binary PGM by magic."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] == CMSK_MAGIC:
        return decode_bitmask(data, str(path))
    if data[:2] == b"P5":
        return _decode_pgm(data, str(path))
    if data[:1] == b"P":
        raise UnsupportedFormatError(f"{path}: only binary (P5) PGM is supported")
    raise BadMagicError(f"{path}: unrecognized mask format")


def save_bitmask(path: Path | str, mask: Bitmask) -> None:
    with atomic_write(path) as fh:
        fh.write(encode_bitmask(mask))


def load_feature_stack(path: Path | str) -> FeatureMapStack:
    path = Path(path)
    return decode_feature_stack(path.read_bytes(), str(path))


def save_feature_stack(path: Path | str, stack: FeatureMapStack) -> None:
    with atomic_write(path) as fh:
        fh.write(encode_feature_stack(stack))


# ---------------------------------------------------------------------------
# PGM import

def _decode_pgm(data: bytes, source: str) -> Bitmask:
    pos = 2  # past magic
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise TruncatedPayloadError(f"{source}: PGM header truncated")
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        elif ch.isdigit():
            start = pos
            while pos < len(data) and data[pos:pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise BadMagicError(f"{source}: malformed PGM header")
    width, height, maxval = fields
    if maxval > 255 or maxval <= 0:
        raise UnsupportedFormatError(f"{source}: PGM maxval {maxval} unsupported")
    if width == 0 or height == 0:
        raise ZeroDimensionError(f"{source}: zero PGM dimensions {width}x{height}")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos:]
    if len(raster) != width * height:
        raise TruncatedPayloadError(
            f"{source}: PGM raster is {len(raster)} bytes, expected {width * height}"
        )
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return Bitmask.from_array(arr > 0)


# ---------------------------------------------------------------------------
# manifest

def _require(cond: bool, exc: type, message: str) -> None:
    if not cond:
        raise exc(message)


def load_manifest(path: Path | str, check_files: bool = True) -> DatasetManifest:
    """Load and fully validate a dataset manifest.

    With ``check_files`` (the default) every referenced mask and stack file
    is opened far enough to verify existence, plane counts, and dimension
    agreement.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc

    manifest = parse_manifest(raw, source=str(path))
    manifest.base_dir = path.parent
    if check_files:
        _check_referenced_files(manifest)
    return manifest


def parse_manifest(raw, source: str = "<dict>") -> DatasetManifest:
    """Validate manifest structure and invariants (no file access)."""
    _require(isinstance(raw, dict), ManifestParseError, f"{source}: manifest must be an object")
    try:
        classes_raw = raw["scene_classes"]
        images_raw = raw["images"]
        map_count = raw["layer_feature_map_count"]
    except KeyError as exc:
        raise ManifestParseError(f"{source}: missing manifest key {exc}") from exc

    _require(isinstance(map_count, int) and map_count > 0, ManifestParseError,
             f"{source}: layer_feature_map_count must be a positive integer")

    scene_classes = []
    seen_labels: set[int] = set()
    for entry in classes_raw:
        try:
            label, name = int(entry["label"]), str(entry["name"])
        except (TypeError, KeyError) as exc:
            raise ManifestParseError(f"{source}: malformed scene class {entry!r}") from exc
        if label in seen_labels:
            raise DuplicateLabelError(f"{source}: duplicate scene label {label}")
        seen_labels.add(label)
        scene_classes.append(SceneClass(label, name))
    _require(bool(scene_classes), ManifestParseError, f"{source}: no scene classes")
    _require(seen_labels == set(range(len(scene_classes))), ManifestError,
             f"{source}: scene labels must be contiguous from 0")

    images = []
    seen_ids: set[str] = set()
    for entry in images_raw:
        try:
            rec = ImageRecord(
                image_id=str(entry["image_id"]),
                scene_label=int(entry["scene_label"]),
                predicted_label=int(entry["predicted_label"]),
                concept_masks={str(k): str(v) for k, v in entry["concept_masks"].items()},
                feature_stack_path=str(entry["feature_stack_path"]),
            )
        except (TypeError, KeyError, AttributeError) as exc:
            raise ManifestParseError(f"{source}: malformed image entry {entry!r}") from exc
        if rec.scene_label not in seen_labels:
            raise DanglingReferenceError(
                f"{source}: image {rec.image_id} references unknown scene "
                f"label {rec.scene_label}"
            )
        _require(rec.image_id not in seen_ids, ManifestError,
                 f"{source}: duplicate image_id {rec.image_id}")
        seen_ids.add(rec.image_id)
        for concept in rec.concept_masks:
            _require(bool(concept), ManifestError,
                     f"{source}: image {rec.image_id} has an empty concept name")
        images.append(rec)

    return DatasetManifest(scene_classes, images, map_count)


def _peek_stack_header(path: Path) -> tuple[int, int, int]:
    """(plane count, width, height) from a CSTK header without reading planes."""
    with open(path, "rb") as fh:
        head = fh.read(_CSTK_HEADER.size)
    if head[:4] != CSTK_MAGIC:
        raise BadMagicError(f"{path}: not a CSTK file")
    if len(head) < _CSTK_HEADER.size:
        raise TruncatedPayloadError(f"{path}: CSTK header truncated")
    _, version, count, width, height = _CSTK_HEADER.unpack(head)
    if version != FORMAT_VERSION:
        raise UnsupportedFormatError(f"{path}: CSTK version {version} unsupported")
    return count, width, height


def _peek_mask_dims(path: Path) -> tuple[int, int]:
    with open(path, "rb") as fh:
        head = fh.read(_CMSK_HEADER.size)
    if head[:4] == CMSK_MAGIC and len(head) == _CMSK_HEADER.size:
        _, _, width, height = _CMSK_HEADER.unpack(head)
        return width, height
    # PGM (or anything else): cheap enough to parse fully at dataset scale.
    mask = load_bitmask(path)
    return mask.width, mask.height


def _check_referenced_files(manifest: DatasetManifest) -> None:
    for rec in manifest.images:
        stack_path = manifest.resolve(rec.feature_stack_path)
        if not stack_path.is_file():
            raise DanglingReferenceError(
                f"image {rec.image_id}: missing feature stack {stack_path}"
            )
        count, width, height = _peek_stack_header(stack_path)
        if count != manifest.layer_feature_map_count:
            raise FeatureCountMismatchError(
                f"image {rec.image_id}: stack has {count} planes, manifest "
                f"declares {manifest.layer_feature_map_count}"
            )
        for concept, rel in sorted(rec.concept_masks.items()):
            mask_path = manifest.resolve(rel)
            if not mask_path.is_file():
                raise DanglingReferenceError(
                    f"image {rec.image_id}: missing mask file {mask_path} "
                    f"for concept {concept!r}"
                )
            mw, mh = _peek_mask_dims(mask_path)
            if (mw, mh) != (width, height):
                raise DimensionMismatchError(
                    f"image {rec.image_id}: mask {mask_path} is {mw}x{mh}, "
                    f"image is {width}x{height}"
                )


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    return {
        "scene_classes": [
            {"label": sc.label, "name": sc.name} for sc in manifest.scene_classes
        ],
        "layer_feature_map_count": manifest.layer_feature_map_count,
        "images": [
            {
                "image_id": rec.image_id,
                "scene_label": rec.scene_label,
                "predicted_label": rec.predicted_label,
                "concept_masks": dict(sorted(rec.concept_masks.items())),
                "feature_stack_path": rec.feature_stack_path,
            }
            for rec in manifest.images
        ],
    }


def save_manifest(path: Path | str, manifest: DatasetManifest) -> None:
    with atomic_write(path, "w") as fh:
        json.dump(manifest_to_dict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_concept_masks(manifest: DatasetManifest, rec: ImageRecord) -> dict[str, Bitmask]:
    """Load one image's concept masks, keyed by concept name."""
    return {
        concept: load_bitmask(manifest.resolve(rel))
        for concept, rel in sorted(rec.concept_masks.items())
    }


def load_stack(manifest: DatasetManifest, rec: ImageRecord) -> FeatureMapStack:
    """Load one image's feature stack, enforcing the manifest's plane count."""
    stack = load_feature_stack(manifest.resolve(rec.feature_stack_path))
    if len(stack) != manifest.layer_feature_map_count:
        raise FeatureCountMismatchError(
            f"image {rec.image_id}: stack has {len(stack)} planes, manifest "
            f"declares {manifest.layer_feature_map_count}"
        )
    return stack
