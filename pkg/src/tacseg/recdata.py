"""Multimodal recording data model, zero-order-hold resampling, and disk I/O.

A recording is a named bundle of timestamped sensor streams (tactile/visual
embeddings, force-torque, poses) plus an optional frame-wise label track.
Streams arrive at different native rates and are aligned onto one grid by
``synchronize`` before fusion.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import tsm
from .errors import (
    CorruptStream,
    DimMismatch,
    EmptyStream,
    FormatError,
    MissingFile,
    NoOverlap,
)

# The common grid rate: 16.67 Hz in the hardware docs, stored as the exact
# rational 50/3 so long recordings do not drift off-grid.
COMMON_RATE_HZ = 50.0 / 3.0

STREAM_KINDS = ("tactile_embed", "visual_embed", "ft", "pose", "other")

# Tolerance when counting grid points: absorbs float rounding in
# (t_last - t0) * rate so that already-on-grid streams keep their last frame.
_GRID_EPS = 1e-9


@dataclass(frozen=True)
class SensorStream:
    """One sensor's samples: strictly increasing timestamps, one vector each."""

    name: str
    kind: str
    rate_hz: float
    timestamps: np.ndarray  # (T,) float64 seconds
    values: np.ndarray      # (T, dim) float64

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.float64)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            vals = vals.reshape(len(ts), -1)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        if self.kind not in STREAM_KINDS:
            raise CorruptStream(f"{self.name}: unknown kind {self.kind!r}")
        if not (self.rate_hz > 0):
            raise CorruptStream(f"{self.name}: rate_hz must be > 0")
        if len(ts) != len(vals):
            raise DimMismatch(f"{self.name}: {len(ts)} timestamps vs {len(vals)} frames")
        if len(ts):
            if not np.all(np.isfinite(ts)):
                raise CorruptStream(f"{self.name}: non-finite timestamp")
            if np.any(ts < 0):
                raise CorruptStream(f"{self.name}: negative timestamp")
            if np.any(np.diff(ts) <= 0):
                raise CorruptStream(f"{self.name}: timestamps not strictly increasing")
            if not np.all(np.isfinite(vals)):
                raise CorruptStream(f"{self.name}: non-finite sample value")

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class LabelTrack:
    vocabulary: tuple
    labels: np.ndarray  # (T,) int64 class indices

    def __post_init__(self):
        object.__setattr__(self, "vocabulary", tuple(self.vocabulary))
        lab = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", lab)
        if len(self.vocabulary) == 0:
            raise FormatError("empty label vocabulary")
        if lab.size and (lab.min() < 0 or lab.max() >= len(self.vocabulary)):
            raise FormatError("label index outside vocabulary")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Recording:
    """Named stream bundle. Timestamps are rebased so the earliest stream is 0."""

    name: str
    streams: dict
    labels: LabelTrack | None = None
    rate_hz: float | None = None  # designated common rate once synchronized
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.streams:
            raise EmptyStream(f"recording {self.name!r} has no streams")
        for key, s in self.streams.items():
            if key != s.name:
                raise FormatError(f"stream keyed {key!r} but named {s.name!r}")
            if len(s) == 0:
                raise EmptyStream(f"{self.name}/{s.name} is empty")
        t0 = min(s.timestamps[0] for s in self.streams.values())
        if t0 != 0.0:
            rebased = {
                k: replace(s, timestamps=s.timestamps - t0)
                for k, s in self.streams.items()
            }
            object.__setattr__(self, "streams", rebased)

    def stream_of_kind(self, kind: str) -> SensorStream:
        hits = [s for s in self.streams.values() if s.kind == kind]
        if len(hits) != 1:
            raise FormatError(f"{self.name}: expected one {kind!r} stream, found {len(hits)}")
        return hits[0]

    def streams_of_kind(self, kind: str) -> list:
        return sorted((s for s in self.streams.values() if s.kind == kind),
                      key=lambda s: s.name)

    @property
    def frame_count(self) -> int | None:
        counts = {len(s) for s in self.streams.values()}
        return counts.pop() if len(counts) == 1 else None


def _grid(t0: float, t_end: float, rate_hz: float) -> np.ndarray:
    n = int(np.floor((t_end - t0) * rate_hz + _GRID_EPS)) + 1
    return t0 + np.arange(n, dtype=np.float64) / rate_hz


def _hold_indices(timestamps: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Index of the latest input sample at or before each grid point."""
    idx = np.searchsorted(timestamps, grid, side="right") - 1
    if np.any(idx < 0):
        raise NoOverlap("grid point precedes first sample")
    return idx


def _resample_onto(stream: SensorStream, grid: np.ndarray, rate_hz: float) -> SensorStream:
    idx = _hold_indices(stream.timestamps, grid)
    return replace(stream, rate_hz=rate_hz, timestamps=grid,
                   values=stream.values[idx])


def resample(stream: SensorStream, target_hz: float) -> SensorStream:
    """Zero-order-hold resampling onto the grid t0 + k/target_hz.

    Output frame k carries the input sample with the greatest timestamp
    <= t0 + k/target_hz; no value is ever interpolated or invented.
    """
    if not (target_hz > 0):
        raise CorruptStream("target_hz must be > 0")
    if len(stream) == 0:
        raise EmptyStream(stream.name)
    grid = _grid(stream.timestamps[0], stream.timestamps[-1], target_hz)
    return _resample_onto(stream, grid, target_hz)


def synchronize(rec: Recording, target_hz: float = COMMON_RATE_HZ) -> Recording:
    """Resample every stream onto one grid inside the common time window.

    The window is [max of first timestamps, min of last timestamps]; streams
    that do not overlap raise NoOverlap. A label track (defined only on an
    already-aligned recording) is carried over by zero-order hold.
    """
    streams = list(rec.streams.values())
    for s in streams:
        if len(s) == 0:
            raise EmptyStream(s.name)
    t_start = max(s.timestamps[0] for s in streams)
    t_end = min(s.timestamps[-1] for s in streams)
    if t_start > t_end:
        raise NoOverlap(f"{rec.name}: streams do not overlap in time")
    grid = _grid(t_start, t_end, target_hz)
    out = {s.name: _resample_onto(s, grid, target_hz) for s in streams}

    labels = rec.labels
    if labels is not None:
        base = streams[0].timestamps
        for s in streams[1:]:
            if len(s) != len(base) or not np.array_equal(s.timestamps, base):
                raise FormatError(
                    f"{rec.name}: labels present but streams are not aligned")
        if len(labels) != len(base):
            raise FormatError(
                f"{rec.name}: {len(labels)} labels for {len(base)} frames")
        idx = _hold_indices(base, grid)
        labels = LabelTrack(labels.vocabulary, labels.labels[idx])

    return Recording(name=rec.name, streams=out, labels=labels,
                     rate_hz=target_hz, meta=dict(rec.meta))


# ---------------------------------------------------------------------------
# Disk layout: <dir>/manifest.json referencing TSM1 files next to it.
# ---------------------------------------------------------------------------

def save_recording(rec: Recording, out_dir: str | os.PathLike) -> str:
    """Write manifest + TSM1 payloads to ``out_dir``; returns the manifest path."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"name": rec.name, "rate_hz": rec.rate_hz, "streams": [],
                "meta": dict(rec.meta)}
    for name in sorted(rec.streams):
        s = rec.streams[name]
        vpath = f"{name}.tsm1"
        tpath = f"{name}_ts.tsm1"
        tsm.write_matrix(os.path.join(out_dir, vpath), s.values)
        tsm.write_matrix(os.path.join(out_dir, tpath), s.timestamps)
        manifest["streams"].append({
            "name": s.name, "kind": s.kind, "rate_hz": s.rate_hz,
            "dim": s.dim, "path": vpath, "timestamps_path": tpath,
        })
    if rec.labels is not None:
        tsm.write_matrix(os.path.join(out_dir, "labels.tsm1"),
                         rec.labels.labels.astype(np.float64))
        manifest["labels"] = {"path": "labels.tsm1",
                              "vocabulary": list(rec.labels.vocabulary)}
    mpath = os.path.join(out_dir, "manifest.json")
    tmp = mpath + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, mpath)
    return mpath


def load_recording(path: str | os.PathLike) -> Recording:
    """Load from a manifest path or a directory containing manifest.json."""
    path = os.fspath(path)
    if os.path.isdir(path):
        path = os.path.join(path, "manifest.json")
    if not os.path.exists(path):
        raise MissingFile(path)
    base = os.path.dirname(path)
    with open(path) as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: {e}") from e

    streams = {}
    for entry in manifest.get("streams", []):
        name = entry["name"]
        if name in streams:
            raise FormatError(f"duplicate stream name {name!r}")
        vfile = os.path.join(base, entry["path"])
        tfile = os.path.join(base, entry["timestamps_path"])
        values = tsm.read_matrix(vfile)
        stamps = tsm.read_matrix(tfile)
        if stamps.shape[1] != 1:
            raise FormatError(f"{tfile}: timestamps must be a single column")
        if values.shape[1] != entry["dim"]:
            raise FormatError(
                f"{vfile}: manifest says dim {entry['dim']}, file has {values.shape[1]}")
        streams[name] = SensorStream(
            name=name, kind=entry["kind"], rate_hz=float(entry["rate_hz"]),
            timestamps=stamps[:, 0], values=values)

    labels = None
    lab = manifest.get("labels")
    if lab:
        mat = tsm.read_matrix(os.path.join(base, lab["path"]))
        if mat.shape[1] != 1:
            raise FormatError("label file must be a single column")
        col = mat[:, 0]
        if np.any(col != np.round(col)):
            raise FormatError("label file holds non-integral values")
        labels = LabelTrack(tuple(lab["vocabulary"]), col.astype(np.int64))

    return Recording(name=manifest["name"], streams=streams, labels=labels,
                     rate_hz=manifest.get("rate_hz"),
                     meta=dict(manifest.get("meta", {})))
