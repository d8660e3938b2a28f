"""Command-line pipeline: synth, ft-filter, train, eval, infer."""

import csv
import hashlib
import json
import os

import numpy as np
import pytest

from tacseg import tsm
from tacseg.cli import (
    _parse_modalities,
    _resolve_rate,
    load_skill_split,
    load_trigger_split,
    main,
)
from tacseg.errors import UsageError
from tacseg.recdata import COMMON_RATE_HZ, load_recording
from tacseg.seqmodels import load_checkpoint
from tacseg.synthgen import SKILL_VOCAB, TRIGGER_VOCAB

SYNTH_ARGS = ["--demos", "6", "--clips", "1", "--seed", "0",
              "--train-frac", "0.5", "--val-frac", "0.25",
              "--test-frac", "0.25"]


def tree_hashes(root, exclude=("run_manifest.json",)):
    out = {}
    for base, _, files in os.walk(root):
        for name in files:
            if name in exclude:
                continue
            path = os.path.join(base, name)
            rel = os.path.relpath(path, root)
            with open(path, "rb") as fh:
                out[rel] = hashlib.sha256(fh.read()).hexdigest()
    return out


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    assert main(["synth", "--out", str(root)] + SYNTH_ARGS) == 0
    return root


@pytest.fixture(scope="module")
def trigger_run(tmp_path_factory, dataset):
    out = tmp_path_factory.mktemp("trig")
    code = main(["train", "--data", str(dataset), "--out", str(out),
                 "--pipeline", "triggers", "--arch", "bilstm",
                 "--epochs", "1", "--patience", "1", "--seed", "0"])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def skills_run(tmp_path_factory, dataset):
    out = tmp_path_factory.mktemp("skills")
    code = main(["train", "--data", str(dataset), "--out", str(out),
                 "--pipeline", "skills", "--arch", "tcn",
                 "--epochs", "1", "--patience", "1", "--seed", "0"])
    assert code == 0
    return out


# --- helpers -----------------------------------------------------------------

def test_resolve_rate_snaps_to_common_grid():
    assert _resolve_rate(16.67) == COMMON_RATE_HZ
    assert _resolve_rate(16.666667) == COMMON_RATE_HZ
    assert _resolve_rate(50.0 / 3.0) == COMMON_RATE_HZ
    assert _resolve_rate(20.0) == 20.0
    assert _resolve_rate(16.0) == 16.0


def test_parse_modalities():
    assert _parse_modalities("camera,tactile") == ("camera", "tactile")
    assert _parse_modalities(" ft , pose ") == ("ft", "pose")
    with pytest.raises(UsageError):
        _parse_modalities("camera,audio")
    with pytest.raises(UsageError):
        _parse_modalities(",")


# --- synth -------------------------------------------------------------------

def test_synth_outputs(dataset):
    splits = json.loads((dataset / "splits.json").read_text())
    assert splits == {"train": ["demo000", "demo001", "demo002"],
                      "val": ["demo003", "demo004"], "test": ["demo005"]}
    for demo in ("demo000", "demo005"):
        base = dataset / demo
        for fname in ("manifest.json", "gt.json", "triggers.tsm1",
                      "artifacts.csv", "labels.tsm1"):
            assert (base / fname).exists(), fname
    manifest = json.loads((dataset / "run_manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 0
    assert set(manifest) >= {"command", "config", "inputs", "outputs", "seed",
                             "tool_version", "duration_s"}


def test_synth_rerun_is_byte_identical(dataset, tmp_path):
    again = tmp_path / "again"
    assert main(["synth", "--out", str(again)] + SYNTH_ARGS) == 0
    assert tree_hashes(dataset) == tree_hashes(again)


def test_synth_seed_changes_payload(dataset, tmp_path):
    other = tmp_path / "other"
    args = [a for a in SYNTH_ARGS]
    args[args.index("--seed") + 1] = "1"
    assert main(["synth", "--out", str(other)] + args) == 0
    assert tree_hashes(dataset) != tree_hashes(other)


def test_synth_bad_fractions_exit_2(tmp_path, capsys):
    code = main(["synth", "--out", str(tmp_path / "x"), "--demos", "4",
                 "--train-frac", "0.5", "--val-frac", "0.1",
                 "--test-frac", "0.1"])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_arch_exit_2(dataset, tmp_path):
    code = main(["train", "--data", str(dataset), "--out", str(tmp_path / "x"),
                 "--arch", "gru"])
    assert code == 2


def test_version_flag():
    assert main(["--version"]) == 0


# --- split loaders -----------------------------------------------------------

def test_load_skill_split_shapes(dataset):
    seqs, stats = load_skill_split(dataset, "train")
    assert len(seqs) == 3
    assert all(s.features.shape[1] == 532 for s in seqs)
    assert all(s.labels is not None for s in seqs)
    assert len(stats.mean) == 20
    # Passing the fitted stats back reproduces the same features.
    again, _ = load_skill_split(dataset, "train", stats=stats)
    for a, b in zip(seqs, again):
        assert np.array_equal(a.features, b.features)


def test_load_skill_split_masking(dataset):
    seqs, _ = load_skill_split(dataset, "val", keep=("camera",))
    assert all(np.all(s.features[:, :256] == 0.0) for s in seqs)
    assert all(np.any(s.features[:, 256:512] != 0.0) for s in seqs)


def test_load_trigger_split_shapes(dataset):
    seqs, stats = load_trigger_split(dataset, "train")
    assert len(seqs) == 3
    assert all(s.features.shape[1] == 6 for s in seqs)
    assert len(stats.mean) == 6
    # Labels are the trigger track, mostly background.
    lab = np.concatenate([s.labels for s in seqs])
    assert set(np.unique(lab)) <= {0, 1, 2, 3}
    assert np.mean(lab == 0) > 0.5


# --- train -------------------------------------------------------------------

def test_train_trigger_artifacts(trigger_run):
    ckpt = trigger_run / "model.tsck"
    assert ckpt.exists()
    assert (trigger_run / "train_report.jsonl").exists()
    model, stats = load_checkpoint(ckpt, expect_classes=4)
    assert model.vocabulary == TRIGGER_VOCAB
    assert model.config.input_dim == 6
    assert stats is not None
    manifest = json.loads((trigger_run / "run_manifest.json").read_text())
    assert manifest["config"]["pipeline"] == "triggers"
    assert manifest["config"]["max_idle_ratio"] == 1.0


def test_train_skills_artifacts(skills_run):
    model, stats = load_checkpoint(skills_run / "model.tsck",
                                   expect_arch="tcn")
    assert model.vocabulary == SKILL_VOCAB
    assert model.config.input_dim == 532
    assert len(stats.mean) == 20
    lines = [json.loads(line) for line in
             (skills_run / "train_report.jsonl").read_text().splitlines()]
    assert lines[0]["epoch"] == 1
    assert "best_epoch" in lines[-1]
    manifest = json.loads((skills_run / "run_manifest.json").read_text())
    assert manifest["config"]["max_idle_ratio"] == 0.8


# --- ft-filter ---------------------------------------------------------------

def test_ft_filter_oracle_mode(dataset, tmp_path):
    demo = dataset / "demo000"
    out = tmp_path / "filtered"
    code = main(["ft-filter", "--rec", str(demo),
                 "--intervals", str(demo / "artifacts.csv"),
                 "--out", str(out), "--seed", "3"])
    assert code == 0
    original = load_recording(demo)
    cleaned = load_recording(out)
    ft_a = original.streams["ft"].values
    ft_b = cleaned.streams["ft"].values
    assert ft_a.shape == ft_b.shape
    # Padded interval frames were replaced; everything else is bit-identical.
    with open(demo / "artifacts.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    mask = np.zeros(len(ft_a), dtype=bool)
    for r in rows:
        mask[max(0, int(r["start"]) - 2):int(r["end"]) + 2] = True
    assert np.array_equal(ft_a[~mask], ft_b[~mask])
    assert not np.array_equal(ft_a[mask], ft_b[mask])
    # Untouched streams survive byte-for-byte.
    assert np.array_equal(original.streams["tactile"].values,
                          cleaned.streams["tactile"].values)
    # The applied intervals are echoed next to the output.
    assert (out / "detected_intervals.csv").exists()
    with open(out / "detected_intervals.csv", newline="") as fh:
        echoed = list(csv.DictReader(fh))
    assert echoed == rows


def test_ft_filter_model_mode(dataset, trigger_run, tmp_path):
    out = tmp_path / "filtered"
    code = main(["ft-filter", "--rec", str(dataset / "demo005"),
                 "--checkpoint", str(trigger_run / "model.tsck"),
                 "--out", str(out)])
    assert code == 0
    assert (out / "detected_intervals.csv").exists()
    assert (out / "manifest.json").exists()


def test_ft_filter_wrong_class_count_checkpoint(dataset, skills_run, tmp_path):
    # The skills model has 5 classes; the trigger filter requires 4.
    code = main(["ft-filter", "--rec", str(dataset / "demo000"),
                 "--checkpoint", str(skills_run / "model.tsck"),
                 "--out", str(tmp_path / "x")])
    assert code == 1


# --- eval --------------------------------------------------------------------

def test_eval_outputs(dataset, skills_run, tmp_path, capsys):
    out = tmp_path / "eval"
    code = main(["eval", "--data", str(dataset), "--split", "test",
                 "--checkpoint", str(skills_run / "model.tsck"),
                 "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert printed.startswith("frame_accuracy ")
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics) == {"accuracy", "per_class", "confusion"}
    assert set(metrics["per_class"]) == set(SKILL_VOCAB)
    assert 0.0 <= metrics["accuracy"] <= 1.0
    assert len(metrics["confusion"]) == 5
    with open(out / "per_class.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["class"] for r in rows] == list(SKILL_VOCAB)


def test_eval_trigger_checkpoint_uses_ft_features(dataset, trigger_run,
                                                  tmp_path):
    out = tmp_path / "eval"
    code = main(["eval", "--data", str(dataset), "--split", "val",
                 "--checkpoint", str(trigger_run / "model.tsck"),
                 "--out", str(out)])
    assert code == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics["per_class"]) == set(TRIGGER_VOCAB)


def test_eval_missing_checkpoint_exit_1(dataset, tmp_path):
    code = main(["eval", "--data", str(dataset),
                 "--checkpoint", str(tmp_path / "nope.tsck"),
                 "--out", str(tmp_path / "x")])
    assert code == 1


def test_eval_unknown_split_exit_1(dataset, skills_run, tmp_path):
    code = main(["eval", "--data", str(dataset), "--split", "holdout",
                 "--checkpoint", str(skills_run / "model.tsck"),
                 "--out", str(tmp_path / "x")])
    assert code == 1


# --- infer -------------------------------------------------------------------

def test_infer_outputs(dataset, skills_run, tmp_path):
    out = tmp_path / "infer"
    code = main(["infer", "--rec", str(dataset / "demo005"),
                 "--checkpoint", str(skills_run / "model.tsck"),
                 "--out", str(out)])
    assert code == 0
    probs = tsm.read_matrix(out / "prediction.tsm1")
    rec = load_recording(dataset / "demo005")
    assert probs.shape == (rec.frame_count, 5)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    with open(out / "prediction.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == rec.frame_count
    assert set(r["class_name"] for r in rows) <= set(SKILL_VOCAB)
    svg = (out / "timeline.svg").read_text()
    assert svg.startswith("<svg")
    for name in SKILL_VOCAB:
        assert name in svg


def test_infer_missing_recording_exit_1(skills_run, tmp_path):
    code = main(["infer", "--rec", str(tmp_path / "ghost"),
                 "--checkpoint", str(skills_run / "model.tsck"),
                 "--out", str(tmp_path / "x")])
    assert code == 1
