"""
Minimal dense tensor engine with reverse-mode differentiation.
"""

from .gradcheck import GradCheckReport, check_gradients
from .layers import (
    MLP,
    Linear,
    Module,
    MultiheadAttention,
    Trilinear,
    trilinear_dense,
    trilinear_form,
)
from .optim import Adam, clip_grad_norm
from .tensor import (
    Parameter,
    Tape,
    TapeEntry,
    Tensor,
    active_tape,
    add,
    as_tensor,
    backward,
    checked,
    clip,
    concat,
    cosine_similarity,
    exp,
    is_checked,
    log,
    matmul,
    mean,
    mul,
    neg,
    relu,
    reshape,
    set_checked,
    sigmoid,
    softmax,
    stack,
    sub,
    swapaxes,
    take,
)
from .tensor import sum as tsum

__all__ = [
    "Adam", "GradCheckReport", "Linear", "MLP", "Module", "MultiheadAttention",
    "Parameter", "Tape", "TapeEntry", "Tensor", "Trilinear", "active_tape", "add",
    "as_tensor", "backward", "check_gradients", "checked", "clip", "clip_grad_norm",
    "concat", "cosine_similarity", "exp", "is_checked", "log", "matmul", "mean", "mul",
    "neg", "relu", "reshape", "set_checked", "sigmoid", "softmax", "stack", "sub",
    "swapaxes", "take", "trilinear_dense", "trilinear_form", "tsum",
]
