"""Writers for the conceptcover dataset formats.

Implemented here from the format documentation rather than imported from the
analysis toolkit, so the exporter stays decoupled and the formats get a second
independent implementation. Planes are bit-packed row-major, rows padded to
whole bytes, MSB first, little-endian u32 header fields.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

CMSK_MAGIC = b"CMSK"
CSTK_MAGIC = b"CSTK"
VERSION = 1


def _pack_plane(bits: np.ndarray) -> bytes:
    if bits.ndim != 2:
        raise ValueError(f"expected a 2-D plane, got shape {bits.shape}")
    return np.packbits(bits.astype(bool), axis=1).tobytes()


def encode_cmsk(bits: np.ndarray) -> bytes:
    height, width = bits.shape
    header = CMSK_MAGIC + struct.pack("<BII", VERSION, width, height)
    return header + _pack_plane(bits)


def encode_cstk(planes: np.ndarray) -> bytes:
    if planes.ndim != 3 or planes.shape[0] == 0:
        raise ValueError(f"expected (count, height, width) planes, got {planes.shape}")
    count, height, width = planes.shape
    header = CSTK_MAGIC + struct.pack("<BIII", VERSION, count, width, height)
    return header + b"".join(_pack_plane(p) for p in planes)


def write_cmsk(path: Path, bits: np.ndarray) -> None:
    Path(path).write_bytes(encode_cmsk(bits))


def write_cstk(path: Path, planes: np.ndarray) -> None:
    Path(path).write_bytes(encode_cstk(planes))


def write_manifest(path: Path, scene_classes: list[tuple[int, str]],
                   images: list[dict], feature_map_count: int) -> None:
    """images: dicts with image_id, scene_label, predicted_label,
    concept_masks (name -> relative path), feature_stack_path."""
    payload = {
        "scene_classes": [
            {"label": label, "name": name} for label, name in scene_classes
        ],
        "layer_feature_map_count": feature_map_count,
        "images": images,
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
