"""Tensor autodiff engine and graph Q-network approximators."""

from .autodiff import Tensor, backward, concat
from .qnet import (
    AdamOptimizer,
    GnnConfig,
    ParamStore,
    copy_into_target,
    forward,
    forward_graph,
    init_params,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
)

__all__ = [
    "Tensor",
    "backward",
    "concat",
    "GnnConfig",
    "ParamStore",
    "init_params",
    "forward",
    "forward_graph",
    "sgd_step",
    "AdamOptimizer",
    "copy_into_target",
    "save_checkpoint",
    "load_checkpoint",
]
