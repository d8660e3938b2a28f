"""Sliding-window extraction and the frame->window coverage map.

Windows of length 50 with stride 10 by default. Training windows dominated by
the idle class (> 80% of frames) are dropped so the model learns from active
manipulation; inference keeps every planned window, and a tail window anchored
at T - W guarantees no frame goes uncovered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LabelsRequired
from .featfuse import FusedSequence

WINDOW_SIZE = 50
WINDOW_STRIDE = 10
MAX_IDLE_RATIO = 0.8


@dataclass(frozen=True)
class WindowPlan:
    total_frames: int
    window: int
    stride: int
    starts: tuple

    @property
    def length(self) -> int:
        """Frames per window; shorter than ``window`` only when T < W."""
        return min(self.window, self.total_frames)

    def __len__(self) -> int:
        return len(self.starts)


@dataclass(frozen=True)
class Window:
    start: int
    features: np.ndarray        # (L, D)
    labels: np.ndarray | None   # (L,) training only

    def __len__(self) -> int:
        return len(self.features)


def plan_windows(total_frames: int, window: int = WINDOW_SIZE,
                 stride: int = WINDOW_STRIDE, tail_anchor: bool = True) -> WindowPlan:
    """Starts at every stride multiple; optionally anchor the tail at T - W.

    A sequence shorter than the window yields a single short window at 0.
    """
    if total_frames < 1 or window < 1 or stride < 1:
        raise ValueError("total_frames, window, and stride must be >= 1")
    if total_frames <= window:
        return WindowPlan(total_frames, window, stride, (0,))
    starts = list(range(0, total_frames - window + 1, stride))
    if tail_anchor and starts[-1] != total_frames - window:
        starts.append(total_frames - window)
    return WindowPlan(total_frames, window, stride, tuple(starts))


def cut_windows(seq: FusedSequence, plan: WindowPlan) -> list:
    """Materialize every planned window (no filtering); copies, not views."""
    length = plan.length
    out = []
    for s in plan.starts:
        lab = seq.labels[s:s + length].copy() if seq.labels is not None else None
        out.append(Window(s, seq.features[s:s + length].copy(), lab))
    return out


def make_training_windows(seq: FusedSequence, plan: WindowPlan, idle_class: int,
                          max_idle_ratio: float = MAX_IDLE_RATIO) -> list:
    """Planned windows minus those whose idle fraction strictly exceeds the cap."""
    if seq.labels is None:
        raise LabelsRequired(f"{seq.source or 'sequence'} has no labels")
    kept = []
    for win in cut_windows(seq, plan):
        idle_frac = float(np.mean(win.labels == idle_class))
        if idle_frac > max_idle_ratio:
            continue
        kept.append(win)
    return kept


def frame_coverage(plan: WindowPlan) -> list:
    """For each frame, the indices of the planned windows containing it."""
    cover = [[] for _ in range(plan.total_frames)]
    length = plan.length
    for k, s in enumerate(plan.starts):
        for t in range(s, s + length):
            cover[t].append(k)
    return cover
