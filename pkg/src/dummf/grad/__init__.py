"""Reverse-mode autodiff engine, optimizer, gradient checking, checkpoint I/O."""

from .adam import AdamState, adam_step
from .checkio import MAGIC, load_tensors, save_tensors
from .gradcheck import GradCheckResult, grad_check, grad_check_params
from .tensor import (
    Tensor,
    add,
    backward,
    broadcast_to,
    concat,
    constant,
    cumsum,
    div,
    exp,
    first_nonfinite,
    gather_rows,
    gelu,
    gradients,
    layer_norm,
    matmul,
    max_select,
    mean,
    min_select,
    mul,
    multi_head_attention,
    neg,
    parameter,
    relu,
    reshape,
    slice_,
    softmax,
    sqrt,
    squared_error,
    stack,
    sub,
    sum_,
    swapaxes,
    take,
)

__all__ = [
    "AdamState",
    "adam_step",
    "MAGIC",
    "load_tensors",
    "save_tensors",
    "GradCheckResult",
    "grad_check",
    "grad_check_params",
    "Tensor",
    "add",
    "backward",
    "broadcast_to",
    "concat",
    "constant",
    "cumsum",
    "div",
    "exp",
    "first_nonfinite",
    "gather_rows",
    "gelu",
    "gradients",
    "layer_norm",
    "matmul",
    "max_select",
    "mean",
    "min_select",
    "mul",
    "multi_head_attention",
    "neg",
    "parameter",
    "relu",
    "reshape",
    "slice_",
    "softmax",
    "sqrt",
    "squared_error",
    "stack",
    "sub",
    "sum_",
    "swapaxes",
    "take",
]
