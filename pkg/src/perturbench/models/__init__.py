from .checkpoint import load_checkpoint, save_checkpoint
from .functional import attention, cross_entropy, layer_norm, multi_head_attention, softmax
from .networks import (
    MODEL_KINDS,
    TAP_ATTN,
    TAP_FIRST,
    TAP_LAST,
    Classifier,
    LinearSoftmax,
    LinearSoftmaxConfig,
    TinyCnn,
    TinyCnnConfig,
    TinyViT,
    TinyViTConfig,
    build_model,
)
from .train import TrainConfig, accuracy, grad_check, train

__all__ = [
    "MODEL_KINDS", "TAP_ATTN", "TAP_FIRST", "TAP_LAST",
    "Classifier", "LinearSoftmax", "LinearSoftmaxConfig",
    "TinyCnn", "TinyCnnConfig", "TinyViT", "TinyViTConfig",
    "TrainConfig", "accuracy", "attention", "build_model", "cross_entropy",
    "grad_check", "layer_norm", "load_checkpoint", "multi_head_attention",
    "save_checkpoint", "softmax", "train",
]
