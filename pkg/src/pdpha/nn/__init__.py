"""Minimal float64 reverse-mode autodiff, parameters, optimiser and checkpoints."""

from pdpha.nn.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from pdpha.nn.optim import Adam
from pdpha.nn.params import Parameter, ParameterSet
from pdpha.nn.tensor import (
    MASK_VALUE,
    NonFiniteError,
    ShapeError,
    Tensor,
    add,
    batch_norm,
    concat,
    exp,
    gather_rows,
    grad_enabled,
    index,
    log,
    log_softmax,
    masked_fill,
    matmul,
    mean,
    mean_rows,
    mul,
    no_grad,
    relu,
    reshape,
    softmax,
    sub,
    sum,
    tanh,
    transpose,
)

__all__ = [
    "CheckpointError",
    "load_checkpoint",
    "save_checkpoint",
    "Adam",
    "Parameter",
    "ParameterSet",
    "MASK_VALUE",
    "NonFiniteError",
    "ShapeError",
    "Tensor",
    "add",
    "batch_norm",
    "concat",
    "exp",
    "gather_rows",
    "grad_enabled",
    "index",
    "log",
    "log_softmax",
    "masked_fill",
    "matmul",
    "mean",
    "mean_rows",
    "mul",
    "no_grad",
    "relu",
    "reshape",
    "softmax",
    "sub",
    "sum",
    "tanh",
    "transpose",
]
