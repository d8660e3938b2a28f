"""Feature fusion, normalization stats, quaternions, and TCP pose composition."""

import numpy as np
import pytest

from tacseg.errors import DimMismatch, EmptyDataset, InvalidPose
from tacseg.featfuse import (
    BLOCKS,
    EMBED_DIM,
    FUSED_DIM,
    FusedSequence,
    NormStats,
    canonicalize_quat,
    fit_norm,
    fuse,
    fuse_recording,
    mask_modalities,
    pose_to_tcp,
    quat_from_matrix,
    quat_mul,
    quat_rotate,
    raw_norm_block,
    zscore,
)
from tacseg.recdata import LabelTrack, Recording, SensorStream
from tacseg.wrenchproc import FrameTransform

SQ2 = np.sqrt(0.5)


def rot_z(deg):
    c, s = np.cos(np.deg2rad(deg)), np.sin(np.deg2rad(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# --- quaternions ---------------------------------------------------------

def test_quat_mul_half_turns():
    qz90 = np.array([SQ2, 0.0, 0.0, SQ2])
    qz180 = quat_mul(qz90, qz90)
    np.testing.assert_allclose(qz180, [0.0, 0.0, 0.0, 1.0], atol=1e-12)


def test_quat_identity_is_neutral():
    ident = np.array([1.0, 0.0, 0.0, 0.0])
    q = canonicalize_quat(np.array([0.3, -0.4, 0.5, 0.6]))
    np.testing.assert_allclose(quat_mul(ident, q), q, atol=1e-12)
    np.testing.assert_allclose(quat_mul(q, ident), q, atol=1e-12)


def test_quat_rotate_matches_matrix():
    rng = np.random.default_rng(21)
    for _ in range(200):
        rot = random_rotation(rng)
        q = quat_from_matrix(rot)
        v = rng.normal(size=3)
        np.testing.assert_allclose(quat_rotate(q, v), rot @ v, atol=1e-9)


def test_quat_from_matrix_nonneg_w():
    rng = np.random.default_rng(22)
    for _ in range(200):
        q = quat_from_matrix(random_rotation(rng))
        assert q[0] >= 0.0
        assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)


def test_quat_from_matrix_trace_negative_branch():
    # 180 degree rotation about x has trace -1, exercising the argmax branch.
    rot = np.diag([1.0, -1.0, -1.0])
    q = quat_from_matrix(rot)
    np.testing.assert_allclose(np.abs(q), [0.0, 1.0, 0.0, 0.0], atol=1e-12)
    v = np.array([0.0, 1.0, 2.0])
    np.testing.assert_allclose(quat_rotate(q, v), rot @ v, atol=1e-12)


def test_canonicalize_flips_and_normalizes():
    q = canonicalize_quat(np.array([-2.0, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(q, [1.0, 0.0, 0.0, 0.0])
    batch = canonicalize_quat(np.array([[-1.0, 0.0, 0.0, 0.0],
                                        [0.0, 2.0, 0.0, 0.0]]))
    np.testing.assert_allclose(batch, [[1.0, 0.0, 0.0, 0.0],
                                       [0.0, 1.0, 0.0, 0.0]])


def test_quat_mul_rotation_composition():
    rng = np.random.default_rng(23)
    for _ in range(100):
        r1, r2 = random_rotation(rng), random_rotation(rng)
        q12 = quat_mul(quat_from_matrix(r1), quat_from_matrix(r2))
        v = rng.normal(size=3)
        np.testing.assert_allclose(quat_rotate(q12, v), r1 @ (r2 @ v), atol=1e-9)


# --- pose -> TCP -----------------------------------------------------------

def test_pose_to_tcp_identity_pose_hand_case():
    offset = FrameTransform(rot_z(90.0), np.array([0.0, 0.0, 0.1]))
    poses = np.array([[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]])
    out = pose_to_tcp(poses, offset)
    np.testing.assert_allclose(out[0, :3], [0.0, 0.0, 0.1], atol=1e-12)
    np.testing.assert_allclose(out[0, 3:], [SQ2, 0.0, 0.0, SQ2], atol=1e-12)


def test_pose_to_tcp_rotated_pose_moves_offset():
    # Tracker yawed 90 degrees: a +x offset in the tracker frame lands at +y.
    offset = FrameTransform(np.eye(3), np.array([0.1, 0.0, 0.0]))
    poses = np.array([[1.0, 0.0, 0.0, SQ2, 0.0, 0.0, SQ2]])
    out = pose_to_tcp(poses, offset)
    np.testing.assert_allclose(out[0, :3], [1.0, 0.1, 0.0], atol=1e-12)
    np.testing.assert_allclose(out[0, 3:], poses[0, 3:], atol=1e-12)


def test_pose_to_tcp_output_quats_canonical():
    rng = np.random.default_rng(24)
    quats = canonicalize_quat(rng.normal(size=(50, 4)))
    poses = np.hstack([rng.normal(size=(50, 3)), quats])
    out = pose_to_tcp(poses, FrameTransform(random_rotation(rng), rng.normal(size=3)))
    norms = np.linalg.norm(out[:, 3:], axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)
    assert np.all(out[:, 3] >= 0.0)


def test_pose_to_tcp_rejects_non_unit_quaternion():
    poses = np.array([[0.0, 0.0, 0.0, 1.1, 0.0, 0.0, 0.0]])
    with pytest.raises(InvalidPose):
        pose_to_tcp(poses, FrameTransform.identity())


def test_pose_to_tcp_rejects_wrong_width():
    with pytest.raises(DimMismatch):
        pose_to_tcp(np.zeros((3, 6)), FrameTransform.identity())


# --- normalization ---------------------------------------------------------

def test_fit_norm_population_stats_across_sequences():
    a = np.array([[0.0], [2.0]])
    b = np.array([[4.0]])
    stats = fit_norm([a, b])
    assert stats.mean[0] == pytest.approx(2.0)
    assert stats.std[0] == pytest.approx(np.array([0.0, 2.0, 4.0]).std())


def test_fit_norm_floors_std():
    stats = fit_norm([np.ones((5, 2))])
    np.testing.assert_array_equal(stats.std, [1e-6, 1e-6])


def test_fit_norm_rejects_empty_and_mixed():
    with pytest.raises(EmptyDataset):
        fit_norm([])
    with pytest.raises(DimMismatch):
        fit_norm([np.zeros((2, 3)), np.zeros((2, 4))])


def test_zscore_standardizes_fitted_data():
    rng = np.random.default_rng(25)
    x = rng.normal(loc=3.0, scale=2.0, size=(500, 4))
    stats = fit_norm([x])
    z = zscore(x, stats)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=0), 1.0, atol=1e-9)


def test_norm_stats_round_trip_dict():
    stats = NormStats(np.array([1.0, 2.0]), np.array([0.5, 3.0]))
    again = NormStats.from_dict(stats.to_dict())
    np.testing.assert_array_equal(again.mean, stats.mean)
    np.testing.assert_array_equal(again.std, stats.std)


# --- fusion ------------------------------------------------------------------

def make_blocks(rng, frames=5):
    return (rng.normal(size=(frames, EMBED_DIM)),
            rng.normal(size=(frames, EMBED_DIM)),
            rng.normal(size=(frames, 6)),
            rng.normal(size=(frames, 7)),
            rng.normal(size=(frames, 7)))


def test_fuse_layout_and_embedding_passthrough():
    rng = np.random.default_rng(26)
    tac, vis, ft, pl, pr = make_blocks(rng)
    stats = fit_norm([np.hstack([ft, pl, pr])])
    seq = fuse(tac, vis, ft, pl, pr, stats)
    assert seq.features.shape == (5, FUSED_DIM)
    # Embedding blocks pass through bit-identical.
    lo, hi = BLOCKS["tactile"]
    assert np.array_equal(seq.features[:, lo:hi], tac)
    lo, hi = BLOCKS["camera"]
    assert np.array_equal(seq.features[:, lo:hi], vis)
    # F/T + pose block is the z-scored raw block.
    lo = BLOCKS["ft"][0]
    expect = zscore(np.hstack([ft, pl, pr]), stats)
    np.testing.assert_array_equal(seq.features[:, lo:], expect)


def test_fuse_attaches_labels():
    rng = np.random.default_rng(27)
    tac, vis, ft, pl, pr = make_blocks(rng)
    stats = NormStats(np.zeros(20), np.ones(20))
    seq = fuse(tac, vis, ft, pl, pr, stats, labels=np.array([0, 1, 1, 0, 0]),
               source="demo")
    np.testing.assert_array_equal(seq.labels, [0, 1, 1, 0, 0])
    assert seq.source == "demo"


def test_fuse_rejects_bad_shapes():
    rng = np.random.default_rng(28)
    tac, vis, ft, pl, pr = make_blocks(rng)
    stats = NormStats(np.zeros(20), np.ones(20))
    with pytest.raises(DimMismatch):
        fuse(tac[:, :100], vis, ft, pl, pr, stats)
    with pytest.raises(DimMismatch):
        fuse(tac[:4], vis, ft, pl, pr, stats)
    with pytest.raises(DimMismatch):
        fuse(tac, vis, ft, pl, pr, NormStats(np.zeros(6), np.ones(6)))


def test_fused_sequence_validation():
    with pytest.raises(DimMismatch):
        FusedSequence(np.zeros(5))
    with pytest.raises(DimMismatch):
        FusedSequence(np.array([[np.inf, 0.0]]))
    with pytest.raises(DimMismatch):
        FusedSequence(np.zeros((3, 2)), labels=np.zeros(2, dtype=np.int64))


def test_mask_modalities_zeroes_other_blocks():
    rng = np.random.default_rng(29)
    feats = rng.normal(size=(4, FUSED_DIM))
    out = mask_modalities(feats, keep=("camera",))
    assert out.shape == feats.shape
    lo, hi = BLOCKS["camera"]
    assert np.array_equal(out[:, lo:hi], feats[:, lo:hi])
    for name in ("tactile", "ft", "pose"):
        lo, hi = BLOCKS[name]
        assert np.all(out[:, lo:hi] == 0.0)
    # Keeping everything leaves the matrix untouched, and the input is not
    # modified in place.
    assert np.array_equal(mask_modalities(feats, BLOCKS.keys()), feats)
    assert not np.all(feats[:, :EMBED_DIM] == 0.0)


def test_mask_modalities_unknown_name():
    with pytest.raises(DimMismatch):
        mask_modalities(np.zeros((2, FUSED_DIM)), keep=("audio",))


def make_recording(rng, frames=6, with_labels=True):
    ts = np.arange(frames) * 0.06
    quats = canonicalize_quat(rng.normal(size=(frames, 4)))

    def stream(name, kind, vals):
        return SensorStream(name=name, kind=kind, rate_hz=50 / 3,
                            timestamps=ts, values=vals)

    streams = {
        "tac": stream("tac", "tactile_embed", rng.normal(size=(frames, 256))),
        "cam": stream("cam", "visual_embed", rng.normal(size=(frames, 256))),
        "ft": stream("ft", "ft", rng.normal(size=(frames, 6))),
        "left": stream("left", "pose",
                       np.hstack([rng.normal(size=(frames, 3)), quats])),
        "right": stream("right", "pose",
                        np.hstack([rng.normal(size=(frames, 3)), quats[::-1]])),
    }
    labels = None
    if with_labels:
        labels = LabelTrack(("idle", "grasped"),
                            rng.integers(0, 2, size=frames))
    return Recording(name="fixture", streams=streams, labels=labels,
                     rate_hz=50 / 3)


def test_fuse_recording_matches_direct_fuse():
    rng = np.random.default_rng(30)
    rec = make_recording(rng)
    stats = fit_norm([raw_norm_block(rec)])
    seq = fuse_recording(rec, stats)
    direct = fuse(rec.streams["tac"].values, rec.streams["cam"].values,
                  rec.streams["ft"].values, rec.streams["left"].values,
                  rec.streams["right"].values, stats,
                  labels=rec.labels.labels)
    assert np.array_equal(seq.features, direct.features)
    np.testing.assert_array_equal(seq.labels, rec.labels.labels)
    assert seq.source == "fixture"


def test_fuse_recording_pose_streams_ordered_by_name():
    # "left" sorts before "right"; the left pose occupies the first 7 pose
    # columns regardless of dict insertion order.
    rng = np.random.default_rng(31)
    rec = make_recording(rng)
    stats = NormStats(np.zeros(20), np.ones(20))
    seq = fuse_recording(rec, stats)
    lo = BLOCKS["pose"][0]
    np.testing.assert_array_equal(seq.features[:, lo:lo + 7],
                                  rec.streams["left"].values)


def test_fuse_recording_masking():
    rng = np.random.default_rng(32)
    rec = make_recording(rng)
    stats = fit_norm([raw_norm_block(rec)])
    seq = fuse_recording(rec, stats, keep=("camera",))
    assert np.all(seq.features[:, :EMBED_DIM] == 0.0)
    lo, hi = BLOCKS["camera"]
    assert np.array_equal(seq.features[:, lo:hi], rec.streams["cam"].values)


def test_raw_norm_block_width():
    rng = np.random.default_rng(33)
    rec = make_recording(rng)
    block = raw_norm_block(rec)
    assert block.shape == (6, 20)
    assert np.array_equal(block[:, :6], rec.streams["ft"].values)
