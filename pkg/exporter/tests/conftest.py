"""Independent numpy deconvnet used to cross-check the torch implementation.

This reimplements the same backward pass (transposed conv, ReLU on the
propagating signal, switch unpooling) from scratch on numpy arrays. Shared
with torch are only the weight values. With dyadic weights and inputs every
intermediate value is exactly representable, so the two engines must agree
bit for bit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def np_conv2d(x: np.ndarray, w: np.ndarray, pad: int) -> np.ndarray:
    channels, height, width = x.shape
    out_ch, _, k, _ = w.shape
    padded = np.zeros((channels, height + 2 * pad, width + 2 * pad))
    padded[:, pad:pad + height, pad:pad + width] = x
    out_h = height + 2 * pad - k + 1
    out_w = width + 2 * pad - k + 1
    out = np.zeros((out_ch, out_h, out_w))
    for o in range(out_ch):
        for i in range(out_h):
            for j in range(out_w):
                out[o, i, j] = np.sum(w[o] * padded[:, i:i + k, j:j + k])
    return out


def np_conv_transpose2d(g: np.ndarray, w: np.ndarray, pad: int) -> np.ndarray:
    out_ch, in_ch, k, _ = w.shape
    _, g_h, g_w = g.shape
    full = np.zeros((in_ch, g_h + k - 1, g_w + k - 1))
    for o in range(out_ch):
        for i in range(g_h):
            for j in range(g_w):
                if g[o, i, j] != 0.0:
                    full[:, i:i + k, j:j + k] += w[o] * g[o, i, j]
    height = g_h + k - 1 - 2 * pad
    width = g_w + k - 1 - 2 * pad
    return full[:, pad:pad + height, pad:pad + width]


def np_maxpool2(x: np.ndarray):
    """2x2/stride-2 floor-mode pooling; first strict maximum wins a window,
    matching the torch CPU kernel."""
    channels, height, width = x.shape
    out_h, out_w = height // 2, width // 2
    out = np.zeros((channels, out_h, out_w))
    switches = np.zeros((channels, out_h, out_w, 2), dtype=int)
    for c in range(channels):
        for i in range(out_h):
            for j in range(out_w):
                best = None
                for di in range(2):
                    for dj in range(2):
                        value = x[c, 2 * i + di, 2 * j + dj]
                        if best is None or value > best:
                            best = value
                            switches[c, i, j] = (2 * i + di, 2 * j + dj)
                out[c, i, j] = best
    return out, switches


def np_unpool2(g: np.ndarray, switches: np.ndarray, out_shape) -> np.ndarray:
    out = np.zeros(out_shape)
    channels, g_h, g_w = g.shape
    for c in range(channels):
        for i in range(g_h):
            for j in range(g_w):
                r, s = switches[c, i, j]
                out[c, r, s] = g[c, i, j]
    return out


def numpy_deconv_magnitudes(layer_spec: list, image: np.ndarray) -> np.ndarray:
    """Per-map magnitude planes for a conv/relu/pool stack.

    layer_spec entries: ("conv", weights, padding) | ("relu",) | ("pool",).
    Returns (num_maps, H, W) float planes.
    """
    x = image
    trace = []
    for entry in layer_spec:
        if entry[0] == "conv":
            _, weights, pad = entry
            x = np_conv2d(x, weights, pad)
            trace.append(("conv", weights, pad))
        elif entry[0] == "relu":
            x = np.maximum(x, 0.0)
            trace.append(("relu",))
        elif entry[0] == "pool":
            shape_before = x.shape
            x, switches = np_maxpool2(x)
            trace.append(("pool", switches, shape_before))
        else:
            raise ValueError(entry[0])

    planes = []
    for m in range(x.shape[0]):
        y = np.zeros_like(x)
        y[m] = x[m]
        for entry in reversed(trace):
            if entry[0] == "conv":
                y = np_conv_transpose2d(y, entry[1], entry[2])
            elif entry[0] == "relu":
                y = np.maximum(y, 0.0)
            else:
                y = np_unpool2(y, entry[1], entry[2])
        planes.append(np.abs(y).max(axis=0))
    return np.stack(planes)


def layer_spec_from_bundle(bundle) -> list:
    """Describe a ModelBundle's feature layers for the numpy reference."""
    import torch.nn as nn

    spec = []
    for layer in bundle.feature_layers:
        if isinstance(layer, nn.Conv2d):
            spec.append(("conv", layer.weight.detach().numpy(), layer.padding[0]))
        elif isinstance(layer, nn.ReLU):
            spec.append(("relu",))
        elif isinstance(layer, nn.MaxPool2d):
            spec.append(("pool",))
        else:
            raise ValueError(layer)
    return spec


def dyadic(rng: np.random.Generator, shape, denominator: int,
           low: int, high: int) -> np.ndarray:
    """Random multiples of 1/denominator; exact in float64."""
    return rng.integers(low, high + 1, size=shape).astype(np.float64) / denominator


def write_pgm(path: Path, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=np.uint8)
    height, width = arr.shape
    path.write_bytes(b"P5\n%d %d\n255\n" % (width, height) + arr.tobytes())
