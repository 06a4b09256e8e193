"""Minimal tensor/autodiff kernel for the policy networks."""

from .attention import adaptive_attention
from .checkpoint import load_arrays, save_arrays
from .engine import (
    ShapeError,
    Tape,
    Tensor,
    add,
    backward,
    bias_add,
    bmm,
    concat,
    matmul,
    mean_pool_half,
    mul,
    relu,
    repeat_double,
    reshape,
    scale,
    softmax,
    layer_norm,
    sub,
    sum_all,
    transpose_last2,
    where_mask,
)
from .optim import AdamState, adam_step

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "backward",
    "matmul",
    "bmm",
    "add",
    "sub",
    "mul",
    "scale",
    "bias_add",
    "relu",
    "softmax",
    "layer_norm",
    "reshape",
    "transpose_last2",
    "concat",
    "mean_pool_half",
    "repeat_double",
    "sum_all",
    "where_mask",
    "adaptive_attention",
    "AdamState",
    "adam_step",
    "save_arrays",
    "load_arrays",
]
