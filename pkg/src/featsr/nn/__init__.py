from .tensor import ConfigurationError, DimensionError, Tensor
from .ops import (
    activation,
    batch_norm,
    conv2d,
    cross_entropy,
    dense,
    leaky_relu,
    pixel_shuffle,
    prelu,
)
from .params import AdamConfig, Param, ParameterSet, adam_step
from .gradcheck import finite_difference_check
from .kernels import BACKEND

__all__ = [
    "Tensor",
    "DimensionError",
    "ConfigurationError",
    "conv2d",
    "batch_norm",
    "dense",
    "pixel_shuffle",
    "activation",
    "leaky_relu",
    "prelu",
    "cross_entropy",
    "AdamConfig",
    "Param",
    "ParameterSet",
    "adam_step",
    "finite_difference_check",
    "BACKEND",
]
