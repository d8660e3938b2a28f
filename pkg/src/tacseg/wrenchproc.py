"""Force-torque stream processing.

Two jobs: remap measured wrenches between sensor frames (rotation plus a
lever-arm cross term), and scrub operator trigger artifacts (pull/lock/release
bursts) out of F/T streams by replacing the detected intervals with Gaussian
noise matched to the sequence baseline.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DimMismatch,
    InvalidIntervals,
    InvalidTransform,
    TooShort,
    VocabularyMismatch,
)
from .recdata import SensorStream
from .rng import sub_rng

_SO3_TOL = 1e-9
STD_FLOOR = 1e-6
BASELINE_FRAMES = 20  # leading frames assumed free of trigger actions

FT_CHANNELS = ("Fx", "Fy", "Fz", "Tx", "Ty", "Tz")


@dataclass(frozen=True)
class Wrench:
    force: np.ndarray   # (3,) N
    torque: np.ndarray  # (3,) N*m

    def __post_init__(self):
        f = np.asarray(self.force, dtype=np.float64).reshape(3)
        t = np.asarray(self.torque, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(t))):
            raise DimMismatch("wrench components must be finite")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", t)

    def as_row(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])


@dataclass(frozen=True)
class FrameTransform:
    """Relative pose used by the wrench remap: rotation + displacement (m)."""

    rotation: np.ndarray      # (3, 3)
    displacement: np.ndarray  # (3,)

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        dis = np.asarray(self.displacement, dtype=np.float64).reshape(3)
        err = np.abs(rot.T @ rot - np.eye(3)).max()
        if err > _SO3_TOL:
            raise InvalidTransform(f"rotation not orthonormal (|R'R - I| = {err:.2e})")
        det = np.linalg.det(rot)
        if abs(det - 1.0) > _SO3_TOL:
            raise InvalidTransform(f"det(R) = {det:.12f}, expected +1")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "displacement", dis)

    @classmethod
    def identity(cls) -> "FrameTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "FrameTransform":
        """Config file: {"rotation": 9 row-major reals, "displacement_m": [x,y,z]}."""
        with open(path) as fh:
            cfg = json.load(fh)
        rot = np.asarray(cfg["rotation"], dtype=np.float64).reshape(3, 3)
        dis = np.asarray(cfg["displacement_m"], dtype=np.float64)
        return cls(rot, dis)


def compose(outer: FrameTransform, inner: FrameTransform) -> FrameTransform:
    """Transform equivalent to applying ``inner`` first, then ``outer``."""
    return FrameTransform(outer.rotation @ inner.rotation,
                          outer.displacement + outer.rotation @ inner.displacement)


def invert(tf: FrameTransform) -> FrameTransform:
    return FrameTransform(tf.rotation.T, -(tf.rotation.T @ tf.displacement))


def map_wrench(w: Wrench, tf: FrameTransform) -> Wrench:
    """Remap a wrench into the target frame.

    F' = R F;  tau' = R tau + r x (R F)
    """
    f = tf.rotation @ w.force
    t = tf.rotation @ w.torque + np.cross(tf.displacement, f)
    return Wrench(f, t)


def map_wrench_rows(rows: np.ndarray, tf: FrameTransform) -> np.ndarray:
    """Vectorized remap of a (T, 6) matrix laid out (Fx,Fy,Fz,Tx,Ty,Tz)."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != 6:
        raise DimMismatch(f"expected (T, 6) wrench rows, got {rows.shape}")
    f = rows[:, :3] @ tf.rotation.T
    t = rows[:, 3:] @ tf.rotation.T + np.cross(tf.displacement, f)
    return np.hstack([f, t])


def map_wrench_stream(stream: SensorStream, tf: FrameTransform) -> SensorStream:
    if stream.dim != 6:
        raise DimMismatch(f"{stream.name}: F/T stream must have dim 6, got {stream.dim}")
    return replace(stream, values=map_wrench_rows(stream.values, tf))


# ---------------------------------------------------------------------------
# Trigger-artifact filtering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelStats:
    """Per-channel baseline mean / population std (std floored)."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        s = np.asarray(self.std, dtype=np.float64).reshape(-1)
        if m.shape != s.shape:
            raise DimMismatch("mean/std length mismatch")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "std", np.maximum(s, STD_FLOOR))


@dataclass(frozen=True)
class Interval:
    start: int
    end: int  # exclusive
    label: str

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise InvalidIntervals(f"bad interval [{self.start}, {self.end})")


@dataclass(frozen=True)
class IntervalSet:
    intervals: tuple

    def __post_init__(self):
        ivs = tuple(self.intervals)
        for prev, cur in zip(ivs, ivs[1:]):
            if cur.start < prev.end:
                raise InvalidIntervals(
                    f"intervals overlap or unsorted: [{prev.start},{prev.end}) then "
                    f"[{cur.start},{cur.end})")
        object.__setattr__(self, "intervals", ivs)

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def check_bounds(self, total_frames: int) -> None:
        if self.intervals and self.intervals[-1].end > total_frames:
            raise InvalidIntervals(
                f"interval end {self.intervals[-1].end} exceeds T={total_frames}")


def baseline_stats(ft: np.ndarray, n: int = BASELINE_FRAMES) -> ChannelStats:
    """Mean / population std of the first ``n`` frames of each channel."""
    ft = np.asarray(ft, dtype=np.float64)
    if n < 2:
        raise TooShort("baseline needs at least 2 frames")
    if ft.shape[0] < n:
        raise TooShort(f"sequence has {ft.shape[0]} frames, baseline needs {n}")
    head = ft[:n]
    return ChannelStats(head.mean(axis=0), head.std(axis=0))


def filter_trigger_artifacts(ft: np.ndarray, intervals: IntervalSet,
                             stats: ChannelStats, seed: int,
                             pad: int = 2) -> np.ndarray:
    """Replace interval frames with iid Gaussian draws matching the baseline.

    Frames outside the (padded) intervals are returned bit-identical. ``pad``
    widens each interval to absorb ramp edges; padded intervals that touch are
    merged rather than rejected.
    """
    ft = np.asarray(ft, dtype=np.float64)
    total = ft.shape[0]
    intervals.check_bounds(total)
    if ft.ndim != 2 or ft.shape[1] != len(stats.mean):
        raise DimMismatch(f"ft shape {ft.shape} vs {len(stats.mean)} stat channels")

    mask = np.zeros(total, dtype=bool)
    for iv in intervals:
        mask[max(0, iv.start - pad):min(total, iv.end + pad)] = True

    out = ft.copy()
    k = int(mask.sum())
    if k:
        rng = sub_rng(seed, "trigger-noise")
        out[mask] = stats.mean + stats.std * rng.standard_normal((k, ft.shape[1]))
    return out


def labels_to_intervals(labels: np.ndarray, vocabulary,
                        none_class: int = 0) -> IntervalSet:
    """Maximal runs of one non-background class become one interval each."""
    labels = np.asarray(labels, dtype=np.int64)
    out = []
    t = 0
    while t < len(labels):
        cls = labels[t]
        run = t + 1
        while run < len(labels) and labels[run] == cls:
            run += 1
        if cls != none_class:
            out.append(Interval(t, run, vocabulary[cls]))
        t = run
    return IntervalSet(tuple(out))


def detect_trigger_intervals(features: np.ndarray, model, window: int = 50,
                             stride: int = 10) -> IntervalSet:
    """Segment the stream with a 4-class trigger model and extract intervals.

    ``features`` is the model's input matrix (by default the 6-channel F/T
    signal, z-scored with the stats stored in the model checkpoint).
    """
    from . import segmenter, windower  # deferred: avoids an import cycle

    if model.config.num_classes != 4:
        raise VocabularyMismatch(
            f"trigger model must have 4 classes, got {model.config.num_classes}")
    features = np.asarray(features, dtype=np.float64)
    plan = windower.plan_windows(features.shape[0], window, stride)
    pred = segmenter.segment_features(model, features, plan)
    vocab = model.vocabulary or ("none", "pull", "lock", "release")
    return labels_to_intervals(pred.labels, vocab, none_class=0)


def save_intervals_csv(intervals: IntervalSet, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start", "end", "class"])
        for iv in intervals:
            w.writerow([iv.start, iv.end, iv.label])


def load_intervals_csv(path: str | os.PathLike) -> IntervalSet:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return IntervalSet(tuple(
        Interval(int(r["start"]), int(r["end"]), r["class"]) for r in rows))
