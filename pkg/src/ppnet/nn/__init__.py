"""Minimal numpy layer engine: forward, backward, gradient checks, Adam."""

from ppnet.nn.gradcheck import GradCheckResult, gradient_check, layer_gradient_check
from ppnet.nn.layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool,
    ReLU,
    SoftmaxCrossEntropy,
    conv_output_shape,
)
from ppnet.nn.network import LayerRow, Network
from ppnet.nn.optim import Adam

__all__ = [
    "Adam",
    "BatchNorm",
    "Conv2D",
    "Dense",
    "Dropout",
    "Flatten",
    "GradCheckResult",
    "Layer",
    "LayerRow",
    "MaxPool",
    "Network",
    "ReLU",
    "SoftmaxCrossEntropy",
    "conv_output_shape",
    "gradient_check",
    "layer_gradient_check",
]
