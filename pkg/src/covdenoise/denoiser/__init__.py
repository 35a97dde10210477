"""Trainable residual convolutional denoiser for covariance and eigenvector
matrices, with its own convolution ops, backpropagation, Adam training loop
and binary weight persistence."""

from .network import (
    DenoiserConfig,
    DenoiserWeights,
    ResidualBlockWeights,
    forward,
    forward_batch,
    init_weights,
    loss_and_gradients,
    tensor_shapes,
)
from .ops import conv2d_backward, conv2d_same, relu
from .storage import load_weights, save_weights
from .training import (
    TrainingHistory,
    TrainingSet,
    build_training_set_rolling,
    build_training_set_simulation,
    train,
)

__all__ = [
    "DenoiserConfig",
    "DenoiserWeights",
    "ResidualBlockWeights",
    "TrainingHistory",
    "TrainingSet",
    "build_training_set_rolling",
    "build_training_set_simulation",
    "conv2d_backward",
    "conv2d_same",
    "forward",
    "forward_batch",
    "init_weights",
    "load_weights",
    "loss_and_gradients",
    "relu",
    "save_weights",
    "tensor_shapes",
    "train",
]
