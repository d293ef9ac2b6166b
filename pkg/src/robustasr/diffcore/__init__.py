"""Minimal reverse-mode tensor engine: exactly the primitives the nets need."""

from .tensor import (
    DTYPE,
    DimensionError,
    Tensor,
    absolute,
    backward,
    concat,
    div,
    exp,
    gather_rows,
    getitem,
    grad_enabled,
    log,
    matmul,
    maximum_const,
    no_grad,
    pad,
    power,
    reshape,
    sqrt,
    take,
    tanh,
    tmean,
    transpose,
    tsum,
)
from .ops import (
    BatchNormState,
    ConfigurationError,
    activation,
    batch_norm,
    batch_norm_virtual,
    const_param,
    conv1d,
    conv1d_transposed,
    dense,
    dropout,
    fan_in_uniform,
    glu,
    iir_first_order,
    iir_scan,
    layer_norm,
    leaky_relu,
    log_softmax_lastdim,
    max_pool1d,
    prelu,
    relu,
    sigmoid,
    softmax_lastdim,
    swish,
    zeros_param,
)
from .optim import Adam, LrSchedule, RMSprop, TrainingDiverged, lr_at, optimizer_step

__all__ = [
    "DTYPE",
    "DimensionError",
    "Tensor",
    "absolute",
    "backward",
    "concat",
    "div",
    "exp",
    "gather_rows",
    "getitem",
    "grad_enabled",
    "log",
    "matmul",
    "maximum_const",
    "no_grad",
    "pad",
    "power",
    "reshape",
    "sqrt",
    "take",
    "tanh",
    "tmean",
    "transpose",
    "tsum",
    "BatchNormState",
    "ConfigurationError",
    "activation",
    "batch_norm",
    "batch_norm_virtual",
    "const_param",
    "conv1d",
    "conv1d_transposed",
    "dense",
    "dropout",
    "fan_in_uniform",
    "glu",
    "iir_first_order",
    "iir_scan",
    "layer_norm",
    "leaky_relu",
    "log_softmax_lastdim",
    "max_pool1d",
    "prelu",
    "relu",
    "sigmoid",
    "softmax_lastdim",
    "swish",
    "zeros_param",
    "Adam",
    "LrSchedule",
    "RMSprop",
    "TrainingDiverged",
    "lr_at",
    "optimizer_step",
]
