"""Wrench frame remapping and trigger-artifact filtering."""

import json

import numpy as np
import pytest

from tacseg.errors import (
    DimMismatch,
    InvalidIntervals,
    InvalidTransform,
    TooShort,
    VocabularyMismatch,
)
from tacseg.rng import sub_rng
from tacseg.wrenchproc import (
    ChannelStats,
    FrameTransform,
    Interval,
    IntervalSet,
    Wrench,
    baseline_stats,
    compose,
    detect_trigger_intervals,
    filter_trigger_artifacts,
    invert,
    labels_to_intervals,
    load_intervals_csv,
    map_wrench,
    map_wrench_rows,
    map_wrench_stream,
    save_intervals_csv,
)


def rot_z(deg):
    c, s = np.cos(np.deg2rad(deg)), np.sin(np.deg2rad(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_rotation(rng):
    # QR of a Gaussian matrix with positive diagonal gives a Haar rotation;
    # flip one column if the determinant came out -1.
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_transform(rng):
    return FrameTransform(random_rotation(rng), rng.normal(size=3))


# --- hand-checked remap ------------------------------------------------------

def test_map_wrench_hand_case_exact():
    # 90 degree yaw with a 0.1 m z offset: a +x force becomes +y, and the
    # lever arm adds tau = (0,0,0.1) x (0,1,0) = (-0.1, 0, 0).
    tf = FrameTransform(rot_z(90.0), np.array([0.0, 0.0, 0.1]))
    out = map_wrench(Wrench(np.array([1.0, 0.0, 0.0]), np.zeros(3)), tf)
    np.testing.assert_allclose(out.force, [0.0, 1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(out.torque, [-0.1, 0.0, 0.0], atol=1e-12)


def test_identity_transform_is_noop():
    w = Wrench(np.array([1.0, -2.0, 3.0]), np.array([0.5, 0.0, -0.5]))
    out = map_wrench(w, FrameTransform.identity())
    np.testing.assert_array_equal(out.force, w.force)
    np.testing.assert_array_equal(out.torque, w.torque)


def test_compose_matches_sequential_application_1000_random():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        a, b = random_transform(rng), random_transform(rng)
        w = Wrench(rng.normal(size=3), rng.normal(size=3))
        seq = map_wrench(map_wrench(w, b), a)
        comb = map_wrench(w, compose(a, b))
        np.testing.assert_allclose(comb.force, seq.force, atol=1e-9)
        np.testing.assert_allclose(comb.torque, seq.torque, atol=1e-9)


def test_invert_round_trips_1000_random():
    rng = np.random.default_rng(43)
    for _ in range(1000):
        tf = random_transform(rng)
        w = Wrench(rng.normal(size=3), rng.normal(size=3))
        back = map_wrench(map_wrench(w, tf), invert(tf))
        np.testing.assert_allclose(back.force, w.force, atol=1e-9)
        np.testing.assert_allclose(back.torque, w.torque, atol=1e-9)


def test_invert_composes_to_identity():
    rng = np.random.default_rng(44)
    for _ in range(100):
        tf = random_transform(rng)
        ident = compose(invert(tf), tf)
        np.testing.assert_allclose(ident.rotation, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(ident.displacement, 0.0, atol=1e-9)


# --- validation --------------------------------------------------------------

def test_transform_rejects_non_orthonormal():
    with pytest.raises(InvalidTransform):
        FrameTransform(np.eye(3) * 1.001, np.zeros(3))


def test_transform_rejects_reflection():
    refl = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(InvalidTransform):
        FrameTransform(refl, np.zeros(3))


def test_wrench_rejects_nan():
    with pytest.raises(DimMismatch):
        Wrench(np.array([np.nan, 0.0, 0.0]), np.zeros(3))


def test_from_json(tmp_path):
    path = tmp_path / "tf.json"
    path.write_text(json.dumps({
        "rotation": rot_z(90.0).reshape(-1).tolist(),
        "displacement_m": [0.0, 0.0, 0.1],
    }))
    tf = FrameTransform.from_json(path)
    np.testing.assert_allclose(tf.rotation, rot_z(90.0))
    np.testing.assert_allclose(tf.displacement, [0.0, 0.0, 0.1])


# --- vectorized remap --------------------------------------------------------

def test_map_wrench_rows_matches_scalar_path():
    rng = np.random.default_rng(5)
    tf = random_transform(rng)
    rows = rng.normal(size=(50, 6))
    out = map_wrench_rows(rows, tf)
    for i in range(50):
        w = map_wrench(Wrench(rows[i, :3], rows[i, 3:]), tf)
        np.testing.assert_allclose(out[i], w.as_row(), atol=1e-12)


def test_map_wrench_rows_shape_check():
    with pytest.raises(DimMismatch):
        map_wrench_rows(np.zeros((4, 5)), FrameTransform.identity())


def test_map_wrench_stream_requires_dim6():
    from tacseg.recdata import SensorStream
    s = SensorStream(name="ft", kind="ft", rate_hz=10.0,
                     timestamps=np.array([0.0]), values=np.zeros((1, 5)))
    with pytest.raises(DimMismatch):
        map_wrench_stream(s, FrameTransform.identity())


# --- baseline stats ----------------------------------------------------------

def test_baseline_stats_population_std():
    ft = np.zeros((25, 2))
    ft[:20, 0] = np.arange(20.0)
    ft[20:, 0] = 1e6  # past the baseline, must not leak in
    stats = baseline_stats(ft, n=20)
    assert stats.mean[0] == pytest.approx(9.5)
    assert stats.std[0] == pytest.approx(np.arange(20.0).std())  # ddof=0
    assert stats.mean[1] == 0.0
    assert stats.std[1] == pytest.approx(1e-6)  # floored


def test_baseline_stats_too_short():
    with pytest.raises(TooShort):
        baseline_stats(np.zeros((10, 6)), n=20)
    with pytest.raises(TooShort):
        baseline_stats(np.zeros((10, 6)), n=1)


# --- intervals ---------------------------------------------------------------

def test_interval_validation():
    with pytest.raises(InvalidIntervals):
        Interval(5, 5, "pull")
    with pytest.raises(InvalidIntervals):
        Interval(-1, 3, "pull")


def test_interval_set_rejects_overlap():
    with pytest.raises(InvalidIntervals):
        IntervalSet((Interval(0, 5, "a"), Interval(4, 8, "b")))


def test_interval_set_bounds_check():
    ivs = IntervalSet((Interval(0, 5, "a"),))
    ivs.check_bounds(5)
    with pytest.raises(InvalidIntervals):
        ivs.check_bounds(4)


def test_labels_to_intervals_runs():
    vocab = ("none", "pull", "lock", "release")
    labels = np.array([0, 0, 1, 1, 1, 0, 2, 2, 0, 3])
    out = labels_to_intervals(labels, vocab)
    assert [(iv.start, iv.end, iv.label) for iv in out] == [
        (2, 5, "pull"), (6, 8, "lock"), (9, 10, "release")]


def test_labels_to_intervals_adjacent_classes_split():
    vocab = ("none", "pull", "lock")
    out = labels_to_intervals(np.array([1, 1, 2, 2]), vocab)
    assert [(iv.start, iv.end, iv.label) for iv in out] == [
        (0, 2, "pull"), (2, 4, "lock")]


def test_labels_to_intervals_all_background():
    assert len(labels_to_intervals(np.zeros(7, dtype=np.int64), ("none",))) == 0


def test_intervals_csv_round_trip(tmp_path):
    ivs = IntervalSet((Interval(2, 5, "pull"), Interval(9, 14, "lock")))
    path = tmp_path / "iv.csv"
    save_intervals_csv(ivs, path)
    out = load_intervals_csv(path)
    assert [(iv.start, iv.end, iv.label) for iv in out] == [
        (2, 5, "pull"), (9, 14, "lock")]


# --- artifact filtering ------------------------------------------------------

def test_filter_bit_identical_outside_padding():
    rng = np.random.default_rng(9)
    ft = rng.normal(size=(100, 6))
    stats = baseline_stats(ft)
    ivs = IntervalSet((Interval(40, 50, "pull"),))
    out = filter_trigger_artifacts(ft, ivs, stats, seed=1, pad=2)
    # Padded replacement zone is [38, 52); everything else must be untouched
    # at the bit level.
    assert np.array_equal(out[:38], ft[:38])
    assert np.array_equal(out[52:], ft[52:])
    assert not np.array_equal(out[38:52], ft[38:52])


def test_filter_zero_pad_replaces_exactly_the_interval():
    rng = np.random.default_rng(10)
    ft = rng.normal(size=(60, 6))
    stats = baseline_stats(ft)
    out = filter_trigger_artifacts(ft, IntervalSet((Interval(30, 35, "x"),)),
                                   stats, seed=0, pad=0)
    assert np.array_equal(out[:30], ft[:30])
    assert np.array_equal(out[35:], ft[35:])
    assert not np.array_equal(out[30:35], ft[30:35])


def test_filter_is_seed_deterministic():
    rng = np.random.default_rng(11)
    ft = rng.normal(size=(80, 6))
    stats = baseline_stats(ft)
    ivs = IntervalSet((Interval(25, 40, "pull"),))
    a = filter_trigger_artifacts(ft, ivs, stats, seed=7)
    b = filter_trigger_artifacts(ft, ivs, stats, seed=7)
    c = filter_trigger_artifacts(ft, ivs, stats, seed=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_filter_noise_matches_stream_rng():
    # The replacement values are the documented stream: baseline mean plus
    # std-scaled standard normals from the seed's "trigger-noise" substream.
    ft = np.zeros((30, 2))
    stats = ChannelStats(np.array([1.0, -1.0]), np.array([0.5, 2.0]))
    ivs = IntervalSet((Interval(10, 12, "x"),))
    out = filter_trigger_artifacts(ft, ivs, stats, seed=3, pad=0)
    expect = np.array([1.0, -1.0]) + np.array([0.5, 2.0]) * \
        sub_rng(3, "trigger-noise").standard_normal((2, 2))
    np.testing.assert_array_equal(out[10:12], expect)


def test_filter_empty_intervals_is_identity():
    ft = np.random.default_rng(12).normal(size=(40, 6))
    stats = baseline_stats(ft)
    out = filter_trigger_artifacts(ft, IntervalSet(()), stats, seed=0)
    assert np.array_equal(out, ft)


def test_filter_interval_out_of_bounds():
    ft = np.zeros((30, 6))
    stats = ChannelStats(np.zeros(6), np.ones(6))
    with pytest.raises(InvalidIntervals):
        filter_trigger_artifacts(ft, IntervalSet((Interval(10, 40, "x"),)),
                                 stats, seed=0)


def test_filter_channel_mismatch():
    ft = np.zeros((30, 6))
    stats = ChannelStats(np.zeros(4), np.ones(4))
    with pytest.raises(DimMismatch):
        filter_trigger_artifacts(ft, IntervalSet(()), stats, seed=0)


def test_detect_trigger_intervals_requires_four_classes():
    from tacseg.seqmodels import ModelConfig, init_model
    cfg = ModelConfig(arch="tcn", input_dim=6, num_classes=5,
                      tcn_blocks=1, tcn_channels=8)
    model = init_model(cfg, seed=0, vocabulary=("a", "b", "c", "d", "e"))
    with pytest.raises(VocabularyMismatch):
        detect_trigger_intervals(np.zeros((60, 6)), model)
