"""Synthetic multi-modal demonstrations with ground-truth labels.

Each demo acts out a clip-insertion routine: for every clip the phases
idle -> grasped -> under_linear_force -> under_torque -> released play in
order, with a trailing idle after the last clip. Modalities differ in how
much phase information they carry, by construction:

- tactile embeddings: per-phase mean directions separated by 2 sigma, so a
  tactile-informed model can segment well;
- visual embeddings: the same construction at 0.5 sigma, riding on a slow
  random walk, deliberately the weakest modality;
- force/torque: force ramps during under_linear_force, torque during
  under_torque, near-baseline otherwise, plus short pull/lock/release
  spikes at phase boundaries that define the trigger ground truth;
- poses: per-clip step changes, near-constant within a clip.

Everything derives from the config seed through named sub-streams, so a
demo index maps to bit-identical output across runs.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatError, LabelError
from .recdata import LabelTrack, Recording, SensorStream, COMMON_RATE_HZ
from .rng import sub_rng
from .tsm import read_matrix, write_matrix
from .wrenchproc import Interval, IntervalSet, save_intervals_csv
from . import recdata

SKILL_VOCAB = ("idle", "grasped", "under_linear_force", "under_torque",
               "released")
TRIGGER_VOCAB = ("none", "pull", "lock", "release")

_IDLE, _GRASPED, _LINEAR, _TORQUE, _RELEASED = range(5)
_PHASE_CYCLE = (_IDLE, _GRASPED, _LINEAR, _TORQUE, _RELEASED)

DEFAULT_DEMOS = 68  # ~440 frames each, targeting roughly 30k frames total


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    clips_per_demo: int = 3
    rate_hz: float = COMMON_RATE_HZ
    #, inclusive frame-count ranges per phase
    dur_idle: tuple = (20, 60)
    dur_grasped: tuple = (15, 40)
    dur_linear: tuple = (20, 50)
    dur_torque: tuple = (15, 40)
    dur_released: tuple = (2, 5)
    # modality informativeness knobs
    tactile_noise: float = 1.0
    tactile_sep: float = 2.0       # phase-mean separation, units of sigma
    tactile_informative: bool = True
    visual_noise: float = 1.0
    visual_sep: float = 0.5
    visual_walk_step: float = 0.06
    visual_informative: bool = True
    ft_noise: float = 0.05
    force_range: tuple = (5.0, 10.0)    # N, under_linear_force ramps
    torque_range: tuple = (0.5, 1.5)    # N*m, under_torque ramps
    pose_noise: float = 1e-3
    # trigger artifacts on the raw F/T stream
    artifact_amp: tuple = (3.0, 8.0)
    artifact_len: tuple = (3, 8)
    embed_dim: int = 256

    def validate(self) -> "SynthConfig":
        if self.clips_per_demo < 1:
            raise ConfigError("clips_per_demo must be >= 1")
        if not (self.rate_hz > 0):
            raise ConfigError("rate_hz must be positive")
        for name in ("dur_idle", "dur_grasped", "dur_linear", "dur_torque",
                     "dur_released", "artifact_len"):
            lo, hi = getattr(self, name)
            if not (1 <= lo <= hi):
                raise ConfigError(f"{name} range ({lo}, {hi}) must satisfy "
                                  "1 <= min <= max")
        for name in ("force_range", "torque_range", "artifact_amp"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ConfigError(f"{name} range ({lo}, {hi}) must satisfy "
                                  "0 < min <= max")
        if self.embed_dim < 1:
            raise ConfigError("embed_dim must be >= 1")
        return self

    @property
    def phase_ranges(self) -> tuple:
        return (self.dur_idle, self.dur_grasped, self.dur_linear,
                self.dur_torque, self.dur_released)


@dataclass(frozen=True)
class GroundTruth:
    skills: np.ndarray    # (T,) indices into SKILL_VOCAB
    triggers: np.ndarray  # (T,) indices into TRIGGER_VOCAB
    artifacts: IntervalSet

    def __post_init__(self):
        skills = np.asarray(self.skills, dtype=np.int64)
        triggers = np.asarray(self.triggers, dtype=np.int64)
        object.__setattr__(self, "skills", skills)
        object.__setattr__(self, "triggers", triggers)
        if len(skills) != len(triggers):
            raise LabelError(f"{len(skills)} skill labels vs "
                             f"{len(triggers)} trigger labels")
        marked = np.zeros(len(triggers), dtype=bool)
        for iv in self.artifacts:
            want = TRIGGER_VOCAB.index(iv.label)
            if not np.all(triggers[iv.start:iv.end] == want):
                raise LabelError(f"trigger labels disagree with interval {iv}")
            marked[iv.start:iv.end] = True
        if np.any(triggers[~marked] != 0):
            raise LabelError("nonzero trigger label outside artifact intervals")

    def __len__(self) -> int:
        return len(self.skills)


def _phase_signatures(cfg: SynthConfig):
    """Dataset-level unit directions fixed by the config seed.

    Tactile and visual phases each get a mean direction in embedding space;
    pull/lock/release each get a characteristic 6-D wrench direction, so a
    trigger looks alike across demos up to per-clip jitter.
    """
    rng = sub_rng(cfg.seed, "signatures")
    tactile = rng.normal(size=(len(SKILL_VOCAB), cfg.embed_dim))
    tactile /= np.linalg.norm(tactile, axis=1, keepdims=True)
    visual = rng.normal(size=(len(SKILL_VOCAB), cfg.embed_dim))
    visual /= np.linalg.norm(visual, axis=1, keepdims=True)
    trigger = rng.normal(size=(3, 6))
    trigger /= np.linalg.norm(trigger, axis=1, keepdims=True)
    return tactile, visual, trigger


def _unit(rng, n: int) -> np.ndarray:
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)


def generate_demo(cfg: SynthConfig, index: int = 0):
    """One demonstration; returns (Recording, GroundTruth)."""
    cfg.validate()
    tact_dirs, vis_dirs, trig_dirs = _phase_signatures(cfg)
    rng = sub_rng(cfg.seed, "demo", index)

    # Phase schedule: per clip the five-phase cycle, then a trailing idle.
    phases = []
    for _ in range(cfg.clips_per_demo):
        for phase in _PHASE_CYCLE:
            lo, hi = cfg.phase_ranges[phase]
            phases.append((phase, int(rng.integers(lo, hi + 1))))
    lo, hi = cfg.dur_idle
    phases.append((_IDLE, int(rng.integers(lo, hi + 1))))

    clip_force_dir = []
    clip_force_peak = []
    clip_torque_dir = []
    clip_torque_peak = []
    clip_pose_left = []
    clip_pose_right = []
    clip_yaw = []
    for clip in range(cfg.clips_per_demo):
        clip_force_dir.append(_unit(rng, 3))
        clip_force_peak.append(rng.uniform(*cfg.force_range))
        clip_torque_dir.append(_unit(rng, 3))
        clip_torque_peak.append(rng.uniform(*cfg.torque_range))
        clip_pose_left.append(rng.uniform(-0.05, 0.05, size=3))
        clip_pose_right.append(rng.uniform(-0.05, 0.05, size=3))
        clip_yaw.append(rng.uniform(-0.3, 0.3))
    artifact_draws = []
    for clip in range(cfg.clips_per_demo):
        per_clip = []
        for kind_idx in range(3):
            length = int(rng.integers(cfg.artifact_len[0],
                                      cfg.artifact_len[1] + 1))
            amp = rng.uniform(*cfg.artifact_amp)
            direction = trig_dirs[kind_idx] + 0.25 * _unit(rng, 6)
            per_clip.append((length, amp, direction / np.linalg.norm(direction)))
        artifact_draws.append(per_clip)
    base_left = np.array([0.35, -0.25, 0.20]) + rng.uniform(-0.02, 0.02, 3)
    base_right = np.array([0.35, 0.25, 0.20]) + rng.uniform(-0.02, 0.02, 3)

    # Frame-level label tracks and phase bookkeeping.
    skills = np.concatenate([np.full(d, p, dtype=np.int64) for p, d in phases])
    total = len(skills)
    phase_starts = np.cumsum([0] + [d for _, d in phases])
    clip_of_frame = np.minimum(
        np.searchsorted(phase_starts[5::5], np.arange(total), side="right"),
        cfg.clips_per_demo - 1)

    # Tactile / visual embeddings.
    tact_amp = (cfg.tactile_sep * cfg.tactile_noise / math.sqrt(2.0)
                if cfg.tactile_informative else 0.0)
    vis_amp = (cfg.visual_sep * cfg.visual_noise / math.sqrt(2.0)
               if cfg.visual_informative else 0.0)
    tactile = tact_amp * tact_dirs[skills]
    tactile = tactile + rng.normal(size=(total, cfg.embed_dim)) * cfg.tactile_noise
    walk = np.cumsum(rng.normal(size=(total, cfg.embed_dim))
                     * cfg.visual_walk_step, axis=0)
    visual = vis_amp * vis_dirs[skills] + walk
    visual = visual + rng.normal(size=(total, cfg.embed_dim)) * cfg.visual_noise

    # Force/torque: half-sine ramps inside the interaction phases.
    ft = np.zeros((total, 6))
    for k, (phase, dur) in enumerate(phases):
        start = int(phase_starts[k])
        clip = min(k // 5, cfg.clips_per_demo - 1)
        u = (np.arange(dur) + 0.5) / dur
        bump = np.sin(np.pi * u)[:, None]
        if phase == _LINEAR:
            ft[start:start + dur, 0:3] += (clip_force_peak[clip] * bump
                                           * clip_force_dir[clip])
        elif phase == _TORQUE:
            ft[start:start + dur, 3:6] += (clip_torque_peak[clip] * bump
                                           * clip_torque_dir[clip])

    # Trigger artifacts: pull at under_linear_force onset, lock at the end of
    # under_torque (the snap into the clip), release at released onset.
    triggers = np.zeros(total, dtype=np.int64)
    intervals = []
    for clip in range(cfg.clips_per_demo):
        cycle = clip * 5
        linear_start = int(phase_starts[cycle + 2])
        torque_end = int(phase_starts[cycle + 4])
        released_start = int(phase_starts[cycle + 4])
        for kind, anchor in (("pull", linear_start),
                             ("lock", None),
                             ("release", released_start)):
            length, amp, direction = artifact_draws[clip][
                ("pull", "lock", "release").index(kind)]
            if kind == "lock":
                start = torque_end - length
            else:
                start = anchor
            end = min(start + length, total)
            u = (np.arange(end - start) + 0.5) / length
            ft[start:end] += amp * np.sin(np.pi * u)[:, None] * direction
            triggers[start:end] = TRIGGER_VOCAB.index(kind)
            intervals.append(Interval(start, end, kind))
    ft += rng.normal(size=(total, 6)) * cfg.ft_noise
    intervals.sort(key=lambda iv: iv.start)

    # Poses: step changes between clips, near-constant within.
    yaw = np.array([clip_yaw[c] for c in clip_of_frame])
    quat = np.column_stack([np.cos(yaw / 2), np.zeros(total), np.zeros(total),
                            np.sin(yaw / 2)])
    progression = np.array([[0.10 * c, 0.0, 0.0] for c in clip_of_frame])
    left_pos = base_left + progression + np.array(clip_pose_left)[clip_of_frame]
    right_pos = base_right + progression + np.array(clip_pose_right)[clip_of_frame]
    left_pos = left_pos + rng.normal(size=(total, 3)) * cfg.pose_noise
    right_pos = right_pos + rng.normal(size=(total, 3)) * cfg.pose_noise
    pose_left = np.hstack([left_pos, quat])
    pose_right = np.hstack([right_pos, quat])

    stamps = np.arange(total, dtype=np.float64) / cfg.rate_hz

    def mk(name, kind, vals):
        return SensorStream(name=name, kind=kind, rate_hz=cfg.rate_hz,
                            timestamps=stamps, values=vals)

    rec = Recording(
        name=f"demo{index:03d}",
        streams={
            "tactile": mk("tactile", "tactile_embed", tactile),
            "camera": mk("camera", "visual_embed", visual),
            "ft": mk("ft", "ft", ft),
            "pose_left": mk("pose_left", "pose", pose_left),
            "pose_right": mk("pose_right", "pose", pose_right),
        },
        labels=LabelTrack(SKILL_VOCAB, skills),
        rate_hz=cfg.rate_hz,
        meta={"demo_index": index},
    )
    gt = GroundTruth(skills=skills, triggers=triggers,
                     artifacts=IntervalSet(tuple(intervals)))
    return rec, gt


def split_counts(n_demos: int, fractions) -> tuple:
    """Demos per split; fractions must sum to 1."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise ConfigError("expected train/val/test fractions")
    if any(f < 0 for f in fractions):
        raise ConfigError("split fractions must be non-negative")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions sum to {sum(fractions)}, not 1")
    n_train = int(round(fractions[0] * n_demos))
    n_val = int(round(fractions[1] * n_demos))
    n_train = min(n_train, n_demos)
    n_val = min(n_val, n_demos - n_train)
    return n_train, n_val, n_demos - n_train - n_val


def generate_dataset(cfg: SynthConfig, n_demos: int = DEFAULT_DEMOS,
                     split=(0.8, 0.1, 0.1)):
    """Independent demos partitioned by demo index; returns three lists."""
    cfg.validate()
    n_train, n_val, _ = split_counts(n_demos, split)
    demos = [generate_demo(cfg, i) for i in range(n_demos)]
    return (demos[:n_train], demos[n_train:n_train + n_val],
            demos[n_train + n_val:])


# ---------------------------------------------------------------------------
# Disk layout: one recording directory per demo plus a ground-truth sidecar
# (gt.json for intervals, triggers.tsm1 for the frame track) and splits.json.
# ---------------------------------------------------------------------------

def save_demo(rec: Recording, gt: GroundTruth, out_dir) -> None:
    recdata.save_recording(rec, out_dir)
    write_matrix(os.path.join(out_dir, "triggers.tsm1"),
                 gt.triggers.astype(np.float64))
    save_intervals_csv(gt.artifacts, os.path.join(out_dir, "artifacts.csv"))
    sidecar = {
        "artifacts": [[iv.start, iv.end, iv.label] for iv in gt.artifacts],
        "trigger_vocabulary": list(TRIGGER_VOCAB),
        "triggers_path": "triggers.tsm1",
    }
    path = os.path.join(out_dir, "gt.json")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_demo(path):
    """Inverse of save_demo; returns (Recording, GroundTruth)."""
    rec = recdata.load_recording(path)
    base = path if os.path.isdir(path) else os.path.dirname(path)
    with open(os.path.join(base, "gt.json"), encoding="utf-8") as fh:
        sidecar = json.load(fh)
    triggers = read_matrix(os.path.join(base, sidecar["triggers_path"]))[:, 0]
    if np.any(triggers != np.round(triggers)):
        raise FormatError("trigger track must hold integral values")
    intervals = IntervalSet(tuple(
        Interval(int(s), int(e), lab) for s, e, lab in sidecar["artifacts"]))
    if rec.labels is None:
        raise FormatError(f"{rec.name}: demo directory lacks skill labels")
    gt = GroundTruth(skills=rec.labels.labels,
                     triggers=triggers.astype(np.int64), artifacts=intervals)
    return rec, gt


def save_dataset(cfg: SynthConfig, n_demos: int, split, out_dir) -> dict:
    """Write every demo directory plus splits.json; returns the split map."""
    cfg.validate()
    n_train, n_val, _ = split_counts(n_demos, split)
    os.makedirs(out_dir, exist_ok=True)
    names = []
    for i in range(n_demos):
        rec, gt = generate_demo(cfg, i)
        save_demo(rec, gt, os.path.join(out_dir, rec.name))
        names.append(rec.name)
    splits = {
        "train": names[:n_train],
        "val": names[n_train:n_train + n_val],
        "test": names[n_train + n_val:],
    }
    path = os.path.join(out_dir, "splits.json")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(splits, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return splits


def load_split(root, name: str):
    """Demos of one split (train/val/test) as (Recording, GroundTruth) pairs."""
    with open(os.path.join(root, "splits.json"), encoding="utf-8") as fh:
        splits = json.load(fh)
    if name not in splits:
        raise FormatError(f"unknown split {name!r}")
    return [load_demo(os.path.join(root, demo)) for demo in splits[name]]
