"""Per-frame feature fusion.

Each synchronized frame becomes one 532-D row: 256-D tactile embedding,
256-D third-person visual embedding, 6 z-scored F/T channels, and 14 z-scored
pose channels (both hands' 7-D TCP poses). Embeddings pass through untouched;
only the F/T + pose block is normalized, with stats fitted on the training
split and persisted in the checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, EmptyDataset, InvalidPose
from .wrenchproc import STD_FLOOR, FrameTransform

EMBED_DIM = 256
FT_DIM = 6
POSE_DIM = 7
FUSED_DIM = 2 * EMBED_DIM + FT_DIM + 2 * POSE_DIM  # 532

# Column blocks of the fused matrix, used for modality masking.
BLOCKS = {
    "tactile": (0, EMBED_DIM),
    "camera": (EMBED_DIM, 2 * EMBED_DIM),
    "ft": (2 * EMBED_DIM, 2 * EMBED_DIM + FT_DIM),
    "pose": (2 * EMBED_DIM + FT_DIM, FUSED_DIM),
}

_QUAT_TOL = 1e-6


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        s = np.asarray(self.std, dtype=np.float64).reshape(-1)
        if m.shape != s.shape:
            raise DimMismatch("mean/std length mismatch")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "std", np.maximum(s, STD_FLOOR))

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.asarray(d["mean"]), np.asarray(d["std"]))


@dataclass(frozen=True)
class FusedSequence:
    """Feature matrix with optional aligned labels. fuse() rows are 532 wide;
    the trigger pipeline reuses this container with 6-channel features."""

    features: np.ndarray  # (T, D) float64
    labels: np.ndarray | None = None
    source: str = ""

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise DimMismatch(f"features must be 2-D, got {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise DimMismatch(f"{self.source or 'sequence'}: non-finite feature")
        object.__setattr__(self, "features", feats)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if len(lab) != len(feats):
                raise DimMismatch(
                    f"{len(lab)} labels for {len(feats)} frames")
            object.__setattr__(self, "labels", lab)

    def __len__(self) -> int:
        return len(self.features)


def fit_norm(raw_seqs) -> NormStats:
    """Per-channel mean / population std over every frame of every sequence."""
    mats = [np.asarray(s, dtype=np.float64) for s in raw_seqs]
    mats = [m for m in mats if m.size]
    if not mats:
        raise EmptyDataset("fit_norm needs at least one non-empty sequence")
    widths = {m.shape[1] for m in mats}
    if len(widths) != 1:
        raise DimMismatch(f"mixed channel counts {sorted(widths)}")
    stacked = np.concatenate(mats, axis=0)
    return NormStats(stacked.mean(axis=0), stacked.std(axis=0))


def zscore(x: np.ndarray, stats: NormStats) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != len(stats.mean):
        raise DimMismatch(f"{x.shape[-1]} channels vs {len(stats.mean)} stats")
    return (x - stats.mean) / stats.std


def fuse(tactile: np.ndarray, visual: np.ndarray, ft: np.ndarray,
         pose_left: np.ndarray, pose_right: np.ndarray, stats: NormStats,
         labels=None, source: str = "") -> FusedSequence:
    """Concatenate [tactile | visual | zscore(ft) | zscore(poseL || poseR)]."""
    tactile = np.asarray(tactile, dtype=np.float64)
    visual = np.asarray(visual, dtype=np.float64)
    ft = np.asarray(ft, dtype=np.float64)
    pose = np.hstack([np.asarray(pose_left, dtype=np.float64),
                      np.asarray(pose_right, dtype=np.float64)])

    lengths = {len(tactile), len(visual), len(ft), len(pose)}
    if len(lengths) != 1:
        raise DimMismatch(f"frame counts differ across modalities: {sorted(lengths)}")
    for mat, want, what in ((tactile, EMBED_DIM, "tactile"),
                            (visual, EMBED_DIM, "visual"),
                            (ft, FT_DIM, "ft"),
                            (pose, 2 * POSE_DIM, "pose")):
        if mat.shape[1] != want:
            raise DimMismatch(f"{what} block is {mat.shape[1]}-D, expected {want}")
    if len(stats.mean) != FT_DIM + 2 * POSE_DIM:
        raise DimMismatch(f"fusion stats must cover 20 channels, got {len(stats.mean)}")

    scored = zscore(np.hstack([ft, pose]), stats)
    feats = np.hstack([tactile, visual, scored])
    assert feats.shape[1] == FUSED_DIM
    return FusedSequence(feats, labels=labels, source=source)


def mask_modalities(features: np.ndarray, keep) -> np.ndarray:
    """Zero every block not named in ``keep``; width stays 532."""
    keep = set(keep)
    unknown = keep - set(BLOCKS)
    if unknown:
        raise DimMismatch(f"unknown modalities {sorted(unknown)}")
    out = np.asarray(features, dtype=np.float64).copy()
    for name, (lo, hi) in BLOCKS.items():
        if name not in keep:
            out[:, lo:hi] = 0.0
    return out


def _recording_blocks(rec):
    tactile = rec.stream_of_kind("tactile_embed").values
    visual = rec.stream_of_kind("visual_embed").values
    ft = rec.stream_of_kind("ft").values
    poses = rec.streams_of_kind("pose")
    if len(poses) != 2:
        raise DimMismatch(f"{rec.name}: expected 2 pose streams, found {len(poses)}")
    return tactile, visual, ft, poses[0].values, poses[1].values


def raw_norm_block(rec) -> np.ndarray:
    """The (T, 20) [ft | poses] matrix fit_norm consumes, pre-normalization."""
    _, _, ft, pose_l, pose_r = _recording_blocks(rec)
    return np.hstack([ft, pose_l, pose_r])


def fuse_recording(rec, stats: NormStats, keep=None) -> FusedSequence:
    """Fuse a synchronized recording's four modalities into one sequence.

    ``keep`` optionally restricts the modality blocks (camera/tactile/ft/
    pose); excluded blocks are zeroed, keeping the fused width fixed.
    """
    tactile, visual, ft, pose_l, pose_r = _recording_blocks(rec)
    labels = rec.labels.labels if rec.labels is not None else None
    seq = fuse(tactile, visual, ft, pose_l, pose_r, stats,
               labels=labels, source=rec.name)
    if keep is None:
        return seq
    return FusedSequence(mask_modalities(seq.features, keep),
                         labels=seq.labels, source=seq.source)


# ---------------------------------------------------------------------------
# Quaternion helpers; poses are (px,py,pz, qw,qx,qy,qz) with unit quaternion.
# ---------------------------------------------------------------------------

def quat_mul(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = np.moveaxis(q1, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(q2, -1, 0)
    return np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=-1)


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vectors by unit quaternions (v' = q v q*)."""
    w = q[..., :1]
    u = q[..., 1:]
    cross1 = np.cross(u, v)
    return v + 2.0 * np.cross(u, cross1 + w * v)


def quat_from_matrix(rot: np.ndarray) -> np.ndarray:
    """Unit quaternion (w,x,y,z) of a rotation matrix, w >= 0."""
    rot = np.asarray(rot, dtype=np.float64)
    t = np.trace(rot)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (rot[2, 1] - rot[1, 2]) / s,
                      (rot[0, 2] - rot[2, 0]) / s,
                      (rot[1, 0] - rot[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(rot)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(rot[i, i] - rot[j, j] - rot[k, k] + 1.0) * 2.0
        q = np.empty(4)
        q[0] = (rot[k, j] - rot[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (rot[j, i] + rot[i, j]) / s
        q[1 + k] = (rot[k, i] + rot[i, k]) / s
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


def canonicalize_quat(q: np.ndarray) -> np.ndarray:
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    flip = np.where(q[..., :1] < 0, -1.0, 1.0)
    return q * flip


def pose_to_tcp(poses: np.ndarray, tcp_offset: FrameTransform) -> np.ndarray:
    """Compose tracker poses with the fixed tracker->TCP offset.

    position' = p + R(q) @ r_offset;  q' = q * q_offset, renormalized.
    """
    poses = np.asarray(poses, dtype=np.float64)
    if poses.ndim != 2 or poses.shape[1] != POSE_DIM:
        raise DimMismatch(f"poses must be (T, 7), got {poses.shape}")
    q = poses[:, 3:]
    norms = np.linalg.norm(q, axis=1)
    if np.any(np.abs(norms - 1.0) > _QUAT_TOL):
        worst = float(np.abs(norms - 1.0).max())
        raise InvalidPose(f"quaternion norm off by {worst:.2e} (tol {_QUAT_TOL})")
    q_off = quat_from_matrix(tcp_offset.rotation)
    pos = poses[:, :3] + quat_rotate(q, tcp_offset.displacement[None, :])
    q_new = canonicalize_quat(quat_mul(q, q_off[None, :]))
    return np.hstack([pos, q_new])
