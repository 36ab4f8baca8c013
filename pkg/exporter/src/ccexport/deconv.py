"""Per-feature-map deconvolution (Zeiler-style backward projection).

The forward pass records everything needed to reverse each layer: conv input
shapes, pooling switch indices. A single feature map is then projected back
to input space by zeroing every other map and walking the layers in reverse:
transposed convolution with the same weights, ReLU on the propagating signal,
and switch-based unpooling. The result is reduced to a per-pixel magnitude
(abs, max over input channels) which binarizes via ``magnitude > epsilon``.

Everything runs in float64; with quantized weights the projection is exact,
which is what makes bit-for-bit comparison against an independent
implementation meaningful.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn


def forward_features(layers: list[nn.Module], image: torch.Tensor):
    """Run the feature layers over one (1, C, H, W) image.

    Returns the final activation and a reversal trace.
    """
    x = image
    trace = []
    for layer in layers:
        if isinstance(layer, nn.Conv2d):
            in_size = x.shape[-2:]
            x = layer(x)
            trace.append(("conv", layer, in_size))
        elif isinstance(layer, nn.ReLU):
            x = torch.relu(x)
            trace.append(("relu", None, None))
        elif isinstance(layer, nn.MaxPool2d):
            in_size = x.shape[-2:]
            x, switches = F.max_pool2d(
                x, layer.kernel_size, layer.stride, layer.padding,
                return_indices=True,
            )
            trace.append(("pool", (layer, switches), in_size))
        else:
            raise ValueError(f"unsupported layer in feature stack: {layer!r}")
    return x, trace


def deconv_plane(trace, activation: torch.Tensor, map_index: int) -> np.ndarray:
    """Magnitude plane (H, W) of one feature map's backward projection."""
    y = torch.zeros_like(activation)
    y[:, map_index] = activation[:, map_index]
    for kind, ctx, in_size in reversed(trace):
        if kind == "conv":
            conv = ctx
            stride = conv.stride
            padding = conv.padding
            kernel = conv.kernel_size
            out_h = (y.shape[-2] - 1) * stride[0] - 2 * padding[0] + kernel[0]
            out_w = (y.shape[-1] - 1) * stride[1] - 2 * padding[1] + kernel[1]
            output_padding = (in_size[0] - out_h, in_size[1] - out_w)
            y = F.conv_transpose2d(
                y, conv.weight, stride=stride, padding=padding,
                output_padding=output_padding,
            )
        elif kind == "relu":
            y = torch.relu(y)
        elif kind == "pool":
            pool, switches = ctx
            y = F.max_unpool2d(
                y, switches, pool.kernel_size, pool.stride, pool.padding,
                output_size=in_size,
            )
    magnitude = y.abs().amax(dim=1)[0]
    return magnitude.numpy()


def deconv_support(trace, activation: torch.Tensor, map_index: int,
                   epsilon: float) -> np.ndarray:
    """Binarized projection: pixels whose magnitude exceeds epsilon."""
    return deconv_plane(trace, activation, map_index) > epsilon


def predict_label(head: nn.Module, activation: torch.Tensor) -> int:
    logits = head(activation)
    return int(torch.argmax(logits, dim=1).item())
