"""Training loop with validation-driven early stopping.

Every epoch shuffles the pooled training windows with an epoch-indexed
seeded generator, applies Adam over mini-batches, then scores validation
frame accuracy through the same windowed soft-vote path used at test time.
Training stops once accuracy has not improved for ``patience`` epochs, and
the returned model is the snapshot of the best epoch, not the last one.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyDataset, LabelsRequired, NoTrainingWindows
from .rng import sub_rng
from .segmenter import segment_sequence
from .seqmodels import (
    SeqModel,
    adam_step,
    backward,
    ce_loss_grad,
    forward,
    init_model,
    init_optimizer,
)
from .windower import MAX_IDLE_RATIO, WINDOW_SIZE, WINDOW_STRIDE
from .windower import make_training_windows, plan_windows


@dataclass(frozen=True)
class TrainConfig:
    epochs_max: int = 60
    patience: int = 5
    lr0: float = 1e-3
    lr_decay: float = 0.5
    lr_decay_every: int = 20
    batch: int = 32
    dropout: float | None = None  # None keeps the model config's rate
    seed: int = 0
    window: int = WINDOW_SIZE
    stride: int = WINDOW_STRIDE
    max_idle_ratio: float = MAX_IDLE_RATIO
    idle_class: int = 0

    def validate(self) -> "TrainConfig":
        if self.epochs_max < 1:
            raise ConfigError(f"epochs_max must be >= 1, got {self.epochs_max}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.batch < 1:
            raise ConfigError(f"batch must be >= 1, got {self.batch}")
        if self.lr0 <= 0:
            raise ConfigError(f"lr0 must be positive, got {self.lr0}")
        if not (0.0 <= self.max_idle_ratio <= 1.0):
            raise ConfigError("max_idle_ratio must be in [0, 1]")
        return self


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)     # one entry per epoch
    val_accuracy: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    best_epoch: int = 0                                 # 1-based
    best_accuracy: float = -1.0
    stopped_reason: str = ""

    def epoch_records(self):
        for i in range(len(self.train_loss)):
            yield {
                "epoch": i + 1,
                "train_loss": self.train_loss[i],
                "val_accuracy": self.val_accuracy[i],
                "lr": self.lr[i],
            }

    def save_jsonl(self, path: str | os.PathLike) -> None:
        path = os.fspath(path)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            for record in self.epoch_records():
                fh.write(json.dumps(record, sort_keys=True) + "\n")
            fh.write(json.dumps({
                "best_epoch": self.best_epoch,
                "best_accuracy": self.best_accuracy,
                "stopped_reason": self.stopped_reason,
            }, sort_keys=True) + "\n")
        os.replace(tmp, path)


def _gather_windows(seqs, cfg: TrainConfig):
    windows = []
    for seq in seqs:
        plan = plan_windows(len(seq), cfg.window, cfg.stride)
        windows.extend(make_training_windows(seq, plan, cfg.idle_class,
                                             cfg.max_idle_ratio))
    return windows


def _epoch_batches(windows, order, batch, full_len):
    """Equal-length windows batch together; short ones run alone."""
    buf = []
    for idx in order:
        win = windows[idx]
        if len(win) != full_len:
            if buf:
                yield buf
                buf = []
            yield [win]
            continue
        buf.append(win)
        if len(buf) == batch:
            yield buf
            buf = []
    if buf:
        yield buf


def validation_accuracy(model: SeqModel, val_seqs, window: int,
                        stride: int) -> float:
    """Micro frame accuracy over whole sequences via windowed soft voting."""
    correct = 0
    total = 0
    for seq in val_seqs:
        if seq.labels is None:
            raise LabelsRequired("validation sequences must carry labels")
        pred = segment_sequence(model, seq, window=window, stride=stride)
        correct += int(np.sum(pred.labels == seq.labels))
        total += len(seq)
    return correct / total


def train(config: TrainConfig, train_seqs, val_seqs, model_config,
          vocabulary=None):
    """Fit a model; returns (best-epoch SeqModel, TrainReport)."""
    config.validate()
    if not train_seqs or not val_seqs:
        raise EmptyDataset("train and validation splits must both be non-empty")
    if config.dropout is not None:
        model_config = dataclasses.replace(model_config, dropout=config.dropout)
    model_config.validate()
    if vocabulary is None:
        vocabulary = tuple(f"class{i}" for i in range(model_config.num_classes))
    windows = _gather_windows(train_seqs, config)
    if not windows:
        raise NoTrainingWindows(
            "every training window exceeded the idle-fraction cap")
    model = init_model(model_config, seed=config.seed, vocabulary=vocabulary)
    opt = init_optimizer(model.params)
    report = TrainReport()
    best_params = None
    for epoch in range(1, config.epochs_max + 1):
        lr = config.lr0 * config.lr_decay ** ((epoch - 1) // config.lr_decay_every)
        order = sub_rng(config.seed, "shuffle", epoch).permutation(len(windows))
        dropout_rng = sub_rng(config.seed, "dropout", epoch)
        loss_sum = 0.0
        frames = 0
        for batch in _epoch_batches(windows, order, config.batch, config.window):
            feats = np.stack([w.features for w in batch])
            labels = np.stack([w.labels for w in batch])
            logits, cache = forward(model, feats, train=True,
                                    dropout_rng=dropout_rng)
            loss, dlogits = ce_loss_grad(logits, labels)
            grads = backward(model, cache, dlogits)
            adam_step(model, grads, opt, lr)
            loss_sum += loss * labels.size
            frames += labels.size
        val_acc = validation_accuracy(model, val_seqs, config.window,
                                      config.stride)
        report.train_loss.append(loss_sum / frames)
        report.val_accuracy.append(val_acc)
        report.lr.append(lr)
        if val_acc > report.best_accuracy:
            report.best_accuracy = val_acc
            report.best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
        if epoch - report.best_epoch >= config.patience:
            report.stopped_reason = "early_stopping"
            break
    if not report.stopped_reason:
        report.stopped_reason = "epochs_max"
    model.params = best_params
    model.version += 1
    return model, report
