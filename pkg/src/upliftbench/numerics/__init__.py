"""Dense float64 autodiff, the shared layer set, and the AdamW optimizer."""

from .autodiff import (
    PROB_EPS,
    GraphError,
    ShapeError,
    Tensor,
    as_tensor,
    backward,
    clip,
    concat,
    div,
    elu,
    exp,
    gradients,
    input_tensor,
    log,
    matmul,
    neg,
    parameter,
    power,
    reshape,
    sigmoid,
    slice_axis,
    softmax,
    sqrt,
    swap_last_axes,
    tanh,
    tmean,
    tsum,
)
from .layers import (
    BatchNormLayer,
    Linear,
    MLP,
    batchnorm_forward,
    fan_in_uniform,
    group_mean,
)
from .optim import AdamW, NonFiniteGradient, adamw_step

__all__ = [
    "PROB_EPS",
    "GraphError",
    "ShapeError",
    "Tensor",
    "as_tensor",
    "backward",
    "clip",
    "concat",
    "div",
    "elu",
    "exp",
    "gradients",
    "input_tensor",
    "log",
    "matmul",
    "neg",
    "parameter",
    "power",
    "reshape",
    "sigmoid",
    "slice_axis",
    "softmax",
    "sqrt",
    "swap_last_axes",
    "tanh",
    "tmean",
    "tsum",
    "BatchNormLayer",
    "Linear",
    "MLP",
    "batchnorm_forward",
    "fan_in_uniform",
    "group_mean",
    "AdamW",
    "NonFiniteGradient",
    "adamw_step",
]
