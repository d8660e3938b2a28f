"""Model container: named parameters + arch dispatch + classifier head.

A SeqModel owns a flat dict of float64 arrays keyed by dotted names. The
architecture modules (bilstm / tcn / transformer) declare their shapes and
implement forward/backward over (B, T, input_dim) batches; this module adds
the shared linear classifier head, inverted dropout in front of it, and the
seeded initialization rules.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import CacheError, ConfigError
from ..rng import sub_rng
from . import bilstm, tcn, transformer
from .config import ModelConfig

_ARCH_MODULES = {"bilstm": bilstm, "tcn": tcn, "transformer": transformer}


@dataclass
class SeqModel:
    config: ModelConfig
    params: dict
    seed: int
    vocabulary: tuple
    version: int = 0
    norm_stats: dict = field(default_factory=dict)

    @property
    def num_classes(self) -> int:
        return self.config.num_classes


def feature_dim(cfg: ModelConfig) -> int:
    """Width of the representation the classifier head consumes."""
    return _ARCH_MODULES[cfg.arch].feature_dim(cfg)


def param_registry(cfg: ModelConfig) -> dict:
    """Name -> shape for every tensor of the architecture plus the head."""
    cfg.validate()
    shapes = dict(_ARCH_MODULES[cfg.arch].param_shapes(cfg))
    shapes["head.W"] = (feature_dim(cfg), cfg.num_classes)
    shapes["head.b"] = (cfg.num_classes,)
    return shapes


def _init_tensor(name: str, shape: tuple, rng) -> np.ndarray:
    last = name.rsplit(".", 1)[-1]
    if last == "g":
        return np.ones(shape)
    if last.startswith("b"):
        return np.zeros(shape)
    fan_in = 1
    for n in shape[:-1]:
        fan_in *= n
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_model(cfg: ModelConfig, seed: int, vocabulary) -> SeqModel:
    """Build a model with seeded uniform weights and structured biases.

    Weight tensors draw from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases and
    layer-norm shifts start at zero, layer-norm gains at one. LSTM forget
    gates get bias 1 so cells initially retain state.
    """
    vocabulary = tuple(vocabulary)
    if len(vocabulary) != cfg.num_classes:
        raise ConfigError(
            f"vocabulary has {len(vocabulary)} entries, config expects "
            f"{cfg.num_classes} classes")
    registry = param_registry(cfg)
    params = {}
    for name in sorted(registry):
        rng = sub_rng(seed, "init", name)
        params[name] = _init_tensor(name, registry[name], rng)
    if cfg.arch == "bilstm":
        hidden = cfg.bilstm_hidden
        for name in params:
            if name.startswith("lstm") and name.endswith(".b"):
                params[name][hidden:2 * hidden] = 1.0
    return SeqModel(config=cfg, params=params, seed=seed, vocabulary=vocabulary)


def forward(model: SeqModel, x: np.ndarray, train: bool = False,
            dropout_rng=None):
    """Run the network; returns (logits, cache) matching x's rank.

    A (T, D) input is treated as a batch of one. Dropout (inverted, applied
    to the features right before the head) only fires when ``train`` is true
    and a generator is supplied.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.ndim != 3 or x.shape[-1] != model.config.input_dim:
        raise ConfigError(
            f"expected input (..., {model.config.input_dim}), got {x.shape}")
    feats, arch_cache = _ARCH_MODULES[model.config.arch].forward(
        model.params, x, model.config)
    mask = None
    rate = model.config.dropout
    if train and dropout_rng is not None and rate > 0.0:
        mask = (dropout_rng.random(feats.shape) >= rate) / (1.0 - rate)
        feats = feats * mask
    logits = feats @ model.params["head.W"] + model.params["head.b"]
    cache = (arch_cache, feats, mask, squeeze, model.version)
    if squeeze:
        return logits[0], cache
    return logits, cache


def backward(model: SeqModel, cache, dlogits: np.ndarray) -> dict:
    """Gradients of the cached forward pass w.r.t. every parameter."""
    arch_cache, feats, mask, squeeze, version = cache
    if version != model.version:
        raise CacheError("forward cache predates a parameter update")
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if squeeze:
        dlogits = dlogits[None]
    flat_f = feats.reshape(-1, feats.shape[-1])
    flat_d = dlogits.reshape(-1, dlogits.shape[-1])
    grads = {
        "head.W": flat_f.T @ flat_d,
        "head.b": flat_d.sum(axis=0),
    }
    dfeats = dlogits @ model.params["head.W"].T
    if mask is not None:
        dfeats = dfeats * mask
    _ARCH_MODULES[model.config.arch].backward(model.params, arch_cache,
                                              dfeats, grads)
    return grads
