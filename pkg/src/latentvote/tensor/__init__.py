"""Dense float32 tensors, reverse-mode autodiff, and neural primitives."""

from .backend import available_lanes, backend_name
from .gradcheck import grad_check
from .ops import (
    RMSNORM_EPS,
    add,
    attention_coupling,
    concat,
    detach,
    embedding,
    gaussian_init,
    log_softmax,
    matmul,
    mul,
    multi_head_attention,
    reshape,
    rmsnorm,
    scale,
    sigmoid,
    silu,
    softmax,
    sub,
    swapaxes,
    swiglu,
    tmean,
    tsum,
    unit_normalize,
)
from .rng import Rng
from .tensor import GradTape, Tensor, active_tape

__all__ = [
    "RMSNORM_EPS",
    "GradTape",
    "Rng",
    "Tensor",
    "active_tape",
    "add",
    "attention_coupling",
    "available_lanes",
    "backend_name",
    "concat",
    "detach",
    "embedding",
    "gaussian_init",
    "grad_check",
    "log_softmax",
    "matmul",
    "mul",
    "multi_head_attention",
    "reshape",
    "rmsnorm",
    "scale",
    "sigmoid",
    "silu",
    "softmax",
    "sub",
    "swapaxes",
    "swiglu",
    "tmean",
    "tsum",
    "unit_normalize",
]
