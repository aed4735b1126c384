from .tensor import (
    MASK_FILL,
    Tensor,
    Value,
    add,
    as_tensor,
    concat,
    cosine_sim,
    cross_entropy_smoothed,
    default_dtype,
    div,
    dropout,
    elu,
    embedding,
    exp,
    gather_rows,
    layer_norm,
    leaky_relu,
    log,
    masked_fill,
    matmul,
    mean,
    mul,
    no_grad,
    power,
    relu,
    reshape,
    set_precision,
    slice_axis,
    softmax,
    sub,
    sum_,
    transpose,
)
from .params import CHECKPOINT_VERSION, ParamStore, xavier_bound
from .optim import Adam
from .gradcheck import grad_check

__all__ = [
    "MASK_FILL", "Tensor", "Value", "add", "as_tensor", "concat", "cosine_sim",
    "cross_entropy_smoothed", "default_dtype", "div", "dropout", "elu",
    "embedding", "exp", "gather_rows", "layer_norm", "leaky_relu", "log",
    "masked_fill", "matmul", "mean", "mul", "no_grad", "power", "relu",
    "reshape", "set_precision", "slice_axis", "softmax", "sub", "sum_",
    "transpose", "CHECKPOINT_VERSION", "ParamStore", "xavier_bound", "Adam",
    "grad_check",
]
