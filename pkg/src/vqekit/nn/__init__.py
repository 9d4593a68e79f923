from .net import (
    LayerSpec,
    ModelSpec,
    add_skip,
    avgpool_global,
    backward,
    check_tensor4,
    concat_skip,
    conv,
    downsample_avg,
    forward,
    init_params,
    leaky_relu,
    relu,
    softmax,
    upsample_nearest,
)
from .optim import SGD, Adam
from .macs import FRAME_BUDGET, audit_budget, count_macs, layer_macs
from .checkpoint import load_params, save_params

__all__ = [
    "LayerSpec", "ModelSpec", "conv", "relu", "leaky_relu", "avgpool_global",
    "upsample_nearest", "downsample_avg", "concat_skip", "add_skip", "softmax",
    "forward", "backward", "init_params", "check_tensor4",
    "SGD", "Adam",
    "FRAME_BUDGET", "count_macs", "layer_macs", "audit_budget",
    "save_params", "load_params",
]
