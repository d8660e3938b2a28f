"""Temporal sequence labelers (BiLSTM / TCN / transformer encoder).

Pure-numpy float64 implementations with exact reverse-mode gradients, a
bias-corrected Adam optimizer, and a binary checkpoint format. All three
architectures map a (T, input_dim) feature sequence to (T, C) frame logits.
"""

from .adam import OptimizerState, adam_step, init_optimizer
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ARCHS, ModelConfig
from .loss import ce_loss, ce_loss_grad, log_softmax, softmax
from .model import SeqModel, backward, feature_dim, forward, init_model, param_registry

__all__ = [
    "ARCHS", "ModelConfig", "SeqModel", "OptimizerState",
    "init_model", "forward", "backward", "feature_dim", "param_registry",
    "ce_loss", "ce_loss_grad", "softmax", "log_softmax",
    "init_optimizer", "adam_step",
    "save_checkpoint", "load_checkpoint",
]
