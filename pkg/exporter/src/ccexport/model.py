"""Scene-classifier models exposed as (feature layers, classifier head).

The feature layers run through the post-ReLU activation of the selected
convolutional layer; the head maps that activation to class logits. All
parameters are float64 so the deconvolution arithmetic is reproducible to the
last bit against a reference implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass
class ModelBundle:
    feature_layers: list[nn.Module]
    head: nn.Module
    in_channels: int
    feature_maps: int


def build_model(model_cfg: dict, num_classes: int) -> ModelBundle:
    name = model_cfg.get("name", "tiny")
    if name == "tiny":
        return build_tiny(
            channels=model_cfg.get("channels", [8, 16]),
            seed=int(model_cfg.get("seed", 0)),
            num_classes=num_classes,
            weights=model_cfg.get("weights"),
        )
    if name == "alexnet":
        return build_alexnet(
            layer=model_cfg.get("layer", "last-conv"),
            num_classes=num_classes,
            weights=model_cfg.get("weights"),
        )
    raise ValueError(f"unknown model {name!r}")


def build_tiny(channels, seed: int, num_classes: int,
               weights: str | None = None) -> ModelBundle:
    """Small grayscale CNN: (conv-relu) [pool] per stage, bias-free convs.

    Bias-free keeps the zero-input contract: a black image produces no
    activations anywhere, hence all-empty exported planes.
    """
    if not channels:
        raise ValueError("tiny model needs at least one conv stage")
    generator = torch.Generator().manual_seed(seed)
    layers: list[nn.Module] = []
    in_ch = 1
    for stage, out_ch in enumerate(channels):
        conv = nn.Conv2d(in_ch, out_ch, kernel_size=3, padding=1, bias=False)
        with torch.no_grad():
            conv.weight.copy_(
                (torch.rand(conv.weight.shape, generator=generator) - 0.5) * 0.8
            )
        layers.append(conv)
        layers.append(nn.ReLU())
        if stage < len(channels) - 1:
            layers.append(nn.MaxPool2d(2))
        in_ch = out_ch

    head = nn.Sequential(
        nn.AdaptiveAvgPool2d(1),
        nn.Flatten(),
        nn.Linear(in_ch, num_classes),
    )
    with torch.no_grad():
        linear = head[2]
        linear.weight.copy_(
            (torch.rand(linear.weight.shape, generator=generator) - 0.5) * 0.5
        )
        linear.bias.zero_()

    bundle = ModelBundle(layers, head, in_channels=1, feature_maps=in_ch)
    _finalize(bundle, weights)
    return bundle


def build_alexnet(layer: str, num_classes: int,
                  weights: str | None = None) -> ModelBundle:
    """AlexNet features truncated at the chosen conv layer's ReLU.

    Weights are random unless a state-dict file is supplied; real use needs a
    fine-tuned checkpoint (see README recipe). The 256 feature maps of the
    last conv layer match the usual scene-recognition setup.
    """
    from torchvision.models import alexnet

    net = alexnet(weights=None, num_classes=num_classes)
    features = list(net.features)
    conv_positions = [i for i, m in enumerate(features) if isinstance(m, nn.Conv2d)]
    if layer == "last-conv":
        target = conv_positions[-1]
    elif layer.startswith("conv:"):
        target = conv_positions[int(layer.split(":", 1)[1])]
    else:
        raise ValueError(f"unknown layer selector {layer!r}")
    # include everything through the ReLU that follows the target conv
    end = target + 1
    while end < len(features) and not isinstance(features[end], nn.ReLU):
        end += 1
    feature_layers = features[:end + 1]

    remainder = features[end + 1:]
    head = nn.Sequential(*remainder, net.avgpool, nn.Flatten(), net.classifier)
    bundle = ModelBundle(
        feature_layers,
        head,
        in_channels=3,
        feature_maps=feature_layers[target].out_channels,
    )
    _finalize(bundle, weights)
    return bundle


def _finalize(bundle: ModelBundle, weights: str | None) -> None:
    container = nn.Sequential(*bundle.feature_layers, bundle.head)
    if weights:
        state = torch.load(weights, map_location="cpu", weights_only=True)
        container.load_state_dict(state)
    container.double()
    container.eval()
    for param in container.parameters():
        param.requires_grad_(False)
