"""Inference and evaluation.

Each planned window is scored independently in eval mode; a frame's final
class distribution is the mean of the softmax rows of every window covering
it, and its label the lowest-index argmax of that mean. Metrics are the
usual confusion-matrix family at frame granularity.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import CoverageGap, DimMismatch
from .featfuse import FusedSequence
from .recdata import LabelTrack
from .seqmodels import forward, softmax
from .tsm import write_matrix
from .windower import Window, WindowPlan, cut_windows, plan_windows

EVAL_BATCH = 64

# One band color per class; cycles past ten classes.
PALETTE = ("#4c78a8", "#f58518", "#54a24b", "#e45756", "#b279a2",
           "#9d755d", "#72b7b2", "#eeca3b", "#bab0ac", "#ff9da6")


@dataclass(frozen=True)
class Prediction:
    probs: np.ndarray   # (T, C) overlap-averaged distributions
    labels: np.ndarray  # (T,) argmax indices

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if probs.ndim != 2 or labels.shape != (probs.shape[0],):
            raise DimMismatch(
                f"probs {probs.shape} incompatible with labels {labels.shape}")
        if probs.size and np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-9:
            raise DimMismatch("probability rows must sum to 1")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Metrics:
    frame_accuracy: float
    precision: np.ndarray  # (C,)
    recall: np.ndarray     # (C,)
    f1: np.ndarray         # (C,)
    support: np.ndarray    # (C,) ground-truth counts
    confusion: np.ndarray  # (C, C) rows = truth, cols = prediction
    vocabulary: tuple


def argmax_tiebreak(row: np.ndarray) -> int:
    """Lowest class index among the maxima (fixed for reproducibility)."""
    return int(np.argmax(row))


def predict_windows(model, seq, plan: WindowPlan, batch: int = EVAL_BATCH):
    """Per-window class probabilities, eval mode, no idle filtering.

    Returns one (Window, (L, C) probability matrix) pair per planned start.
    Windows all share the plan's length, so they are scored in mini-batches.
    """
    features = seq.features if isinstance(seq, FusedSequence) else np.asarray(seq)
    if features.shape[1] != model.config.input_dim:
        raise DimMismatch(
            f"{features.shape[1]}-wide features, model expects "
            f"{model.config.input_dim}")
    windows = cut_windows(FusedSequence(features), plan)
    out = []
    for lo in range(0, len(windows), batch):
        chunk = windows[lo:lo + batch]
        stacked = np.stack([w.features for w in chunk])
        logits, _ = forward(model, stacked, train=False)
        probs = softmax(logits)
        out.extend((w, probs[i]) for i, w in enumerate(chunk))
    return out


def soft_vote(window_probs, plan: WindowPlan, total: int | None = None) -> Prediction:
    """Average the distributions of every window covering each frame.

    Accepts either bare (L, C) matrices in plan order or the (window, probs)
    pairs from predict_windows. Accumulation follows plan order so repeated
    runs sum in the same sequence.
    """
    mats = [wp[1] if isinstance(wp, tuple) else wp for wp in window_probs]
    if len(mats) != len(plan.starts):
        raise DimMismatch(f"{len(mats)} matrices for {len(plan.starts)} windows")
    if total is None:
        total = plan.total_frames
    length = plan.length
    classes = mats[0].shape[1] if mats else 0
    sums = np.zeros((total, classes))
    counts = np.zeros(total, dtype=np.int64)
    for mat, start in zip(mats, plan.starts):
        mat = np.asarray(mat, dtype=np.float64)
        if mat.shape != (length, classes):
            raise DimMismatch(f"window matrix {mat.shape}, expected "
                              f"({length}, {classes})")
        sums[start:start + length] += mat
        counts[start:start + length] += 1
    if np.any(counts == 0):
        missing = int(np.flatnonzero(counts == 0)[0])
        raise CoverageGap(f"frame {missing} covered by no window")
    probs = sums / counts[:, None]
    return Prediction(probs=probs, labels=np.argmax(probs, axis=1))


def segment_features(model, features: np.ndarray,
                     plan: WindowPlan | None = None) -> Prediction:
    """Window, score, and soft-vote a raw (T, D) feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    if plan is None:
        plan = plan_windows(features.shape[0])
    pairs = predict_windows(model, FusedSequence(features), plan)
    return soft_vote(pairs, plan)


def segment_sequence(model, seq: FusedSequence, window: int | None = None,
                     stride: int | None = None) -> Prediction:
    """Convenience wrapper planning windows from the model's usual geometry."""
    kwargs = {}
    if window is not None:
        kwargs["window"] = window
    if stride is not None:
        kwargs["stride"] = stride
    plan = plan_windows(len(seq), **kwargs)
    return soft_vote(predict_windows(model, seq, plan), plan)


def evaluate(pred: Prediction, truth: LabelTrack) -> Metrics:
    """Confusion-derived frame metrics.

    A class absent from both truth and prediction scores precision, recall,
    and F1 of 1.0; absent from truth but predicted scores 0.0.
    """
    truth_labels = truth.labels if isinstance(truth, LabelTrack) else np.asarray(
        truth, dtype=np.int64)
    pred_labels = pred.labels if isinstance(pred, Prediction) else np.asarray(
        pred, dtype=np.int64)
    if len(pred_labels) != len(truth_labels):
        raise DimMismatch(
            f"{len(pred_labels)} predictions for {len(truth_labels)} truth frames")
    vocab = truth.vocabulary if isinstance(truth, LabelTrack) else tuple(
        str(i) for i in range(int(max(truth_labels.max(), pred_labels.max())) + 1))
    classes = len(vocab)
    if pred_labels.size and (pred_labels.min() < 0 or pred_labels.max() >= classes):
        raise DimMismatch(f"predicted label outside [0, {classes})")
    flat = truth_labels * classes + pred_labels
    confusion = np.bincount(flat, minlength=classes * classes).reshape(
        classes, classes)
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    precision = np.where(tp + fp > 0, tp / np.maximum(tp + fp, 1), (fn == 0) * 1.0)
    recall = np.where(tp + fn > 0, tp / np.maximum(tp + fn, 1), (fp == 0) * 1.0)
    denom = precision + recall
    f1 = np.where(denom > 0, 2 * precision * recall / np.maximum(denom, 1e-300), 0.0)
    total = len(truth_labels)
    accuracy = float(tp.sum() / total) if total else 1.0
    return Metrics(frame_accuracy=accuracy, precision=precision, recall=recall,
                   f1=f1, support=confusion.sum(axis=1), confusion=confusion,
                   vocabulary=tuple(vocab))


def summary_line(metrics: Metrics) -> str:
    """Four-decimal one-liner, e.g. ``frame_accuracy 0.9402``."""
    return f"frame_accuracy {metrics.frame_accuracy:.4f}"


def metrics_to_dict(metrics: Metrics) -> dict:
    per_class = {}
    for i, name in enumerate(metrics.vocabulary):
        per_class[name] = {
            "precision": float(metrics.precision[i]),
            "recall": float(metrics.recall[i]),
            "f1": float(metrics.f1[i]),
            "support": int(metrics.support[i]),
        }
    return {
        "accuracy": metrics.frame_accuracy,
        "per_class": per_class,
        "confusion": metrics.confusion.astype(int).tolist(),
    }


def save_metrics_json(metrics: Metrics, path: str | os.PathLike) -> None:
    path = os.fspath(path)
    text = json.dumps(metrics_to_dict(metrics), sort_keys=True, indent=2)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    os.replace(tmp, path)


def save_per_class_csv(metrics: Metrics, path: str | os.PathLike) -> None:
    """Class rows with 4-decimal precision/recall/F1 plus support counts."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "precision", "recall", "f1", "support"])
        for i, name in enumerate(metrics.vocabulary):
            writer.writerow([name, f"{metrics.precision[i]:.4f}",
                             f"{metrics.recall[i]:.4f}", f"{metrics.f1[i]:.4f}",
                             int(metrics.support[i])])
    os.replace(tmp, path)


def save_prediction(pred: Prediction, vocabulary, probs_path, csv_path) -> None:
    """Probability matrix as TSM1 plus a (frame, class_name) CSV."""
    write_matrix(probs_path, pred.probs)
    csv_path = os.fspath(csv_path)
    tmp = csv_path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "class_name"])
        for t, lab in enumerate(pred.labels):
            writer.writerow([t, vocabulary[int(lab)]])
    os.replace(tmp, csv_path)


def _label_runs(labels: np.ndarray):
    runs = []
    start = 0
    for t in range(1, len(labels) + 1):
        if t == len(labels) or labels[t] != labels[start]:
            runs.append((start, t, int(labels[start])))
            start = t
    return runs


def render_timeline_svg(labels: np.ndarray, vocabulary, path) -> None:
    """Horizontal strip of per-frame class bands with a legend below."""
    labels = np.asarray(labels, dtype=np.int64)
    total = max(len(labels), 1)
    width, band_h, legend_h = 1000.0, 48, 26
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{band_h + legend_h + 18}" '
        f'viewBox="0 0 {width:.0f} {band_h + legend_h + 18}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{band_h}" fill="#ddd"/>',
    ]
    for start, end, cls in _label_runs(labels):
        x0 = start / total * width
        x1 = end / total * width
        color = PALETTE[cls % len(PALETTE)]
        parts.append(f'<rect x="{x0:.2f}" y="0" width="{x1 - x0:.2f}" '
                     f'height="{band_h}" fill="{color}"/>')
    x = 4.0
    for i, name in enumerate(vocabulary):
        color = PALETTE[i % len(PALETTE)]
        y = band_h + 8
        parts.append(f'<rect x="{x:.1f}" y="{y}" width="14" height="14" '
                     f'fill="{color}"/>')
        parts.append(f'<text x="{x + 18:.1f}" y="{y + 12}" '
                     f'font-family="sans-serif" font-size="13">{name}</text>')
        x += 28 + 7.5 * len(name)
    parts.append("</svg>")
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
    os.replace(tmp, path)
