"""Minimal reverse-mode autodiff on numpy, plus Adam and checkpoint I/O."""

from .tensor import Tensor, backward, no_grad, nan_checks, grad_enabled, as_tensor
from .ops import (
    add, sub, mul, neg, matmul, reciprocal, pow_const, sqrt,
    exp, log, sin, cos, tanh, relu, leaky_relu, softplus, sigmoid,
    minimum, maximum, clamp, sum_, mean_, reshape, transpose,
    broadcast_to, concat, stack, getitem, conv2d, conv_transpose2d, linear,
)
from .geom import (texture_sample, scatter_add_window, window_indices,
                   lbs_apply, upsample2d)
from .adam import Adam, ParamStore
from .checkpoint import save_arrays, load_arrays, MAGIC
from .fd import gradcheck, numeric_grad

__all__ = [
    "Tensor", "backward", "no_grad", "nan_checks", "grad_enabled", "as_tensor",
    "add", "sub", "mul", "neg", "matmul", "reciprocal", "pow_const", "sqrt",
    "exp", "log", "sin", "cos", "tanh", "relu", "leaky_relu", "softplus",
    "sigmoid", "minimum", "maximum", "clamp", "sum_", "mean_", "reshape",
    "transpose", "broadcast_to", "concat", "stack", "getitem",
    "conv2d", "conv_transpose2d", "linear",
    "texture_sample", "scatter_add_window", "window_indices", "lbs_apply",
    "upsample2d",
    "Adam", "ParamStore", "save_arrays", "load_arrays", "MAGIC",
    "gradcheck", "numeric_grad",
]
