"""Frame-wise cross-entropy over logits."""

from __future__ import annotations

import numpy as np

from ..errors import LabelError


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check_labels(logits, labels):
    if labels.shape != logits.shape[:-1]:
        raise LabelError(
            f"labels shape {labels.shape} does not match logits {logits.shape[:-1]}"
        )
    classes = logits.shape[-1]
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise LabelError(f"labels outside [0, {classes})")


def ce_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood over every frame in the batch."""
    labels = np.asarray(labels, dtype=np.int64)
    _check_labels(logits, labels)
    logp = log_softmax(logits).reshape(-1, logits.shape[-1])
    picked = logp[np.arange(logp.shape[0]), labels.reshape(-1)]
    return float(-picked.mean())


def ce_loss_grad(logits: np.ndarray, labels: np.ndarray):
    """Loss plus dL/dlogits for the mean-over-frames cross entropy."""
    labels = np.asarray(labels, dtype=np.int64)
    _check_labels(logits, labels)
    classes = logits.shape[-1]
    flat = softmax(logits).reshape(-1, classes)
    idx = labels.reshape(-1)
    logp = log_softmax(logits).reshape(-1, classes)
    loss = float(-logp[np.arange(flat.shape[0]), idx].mean())
    dflat = flat.copy()
    dflat[np.arange(flat.shape[0]), idx] -= 1.0
    dflat /= flat.shape[0]
    return loss, dflat.reshape(logits.shape)
