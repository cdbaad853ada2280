"""Minimal numpy-backed neural net toolkit: tensors, tape autodiff, Adam, checkpoints."""

from .autodiff import (
    Tape,
    Tensor,
    add,
    concat,
    dropout,
    gather_pairs,
    log,
    matmul,
    mul,
    narrow,
    permute,
    reduce_sum,
    reshape,
    scale,
    sigmoid,
    softmax,
    stack,
    tanh,
    transpose,
    uniform_param,
    zeros_param,
)
from .checkpoint import FORMAT_VERSION, load_checkpoint, save_checkpoint
from .optim import Adam

__all__ = [
    "Adam",
    "FORMAT_VERSION",
    "Tape",
    "Tensor",
    "add",
    "concat",
    "dropout",
    "gather_pairs",
    "load_checkpoint",
    "log",
    "matmul",
    "mul",
    "narrow",
    "permute",
    "reduce_sum",
    "reshape",
    "save_checkpoint",
    "scale",
    "sigmoid",
    "softmax",
    "stack",
    "tanh",
    "transpose",
    "uniform_param",
    "zeros_param",
]
