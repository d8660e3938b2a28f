"""Command-line pipeline driver.

Subcommands compose into the full workflow from nothing but a seed:

    tacseg synth     --out data --demos 68 --seed 7
    tacseg train     --data data --out run --arch bilstm --seed 7
    tacseg ft-filter --rec data/demo000 --out clean/demo000 --intervals ...
    tacseg eval      --data data --split test --checkpoint run/model.tsck --out run
    tacseg infer     --rec data/demo067 --checkpoint run/model.tsck --out run

Exit codes: 0 success, 1 runtime or data error, 2 usage error. Every
stochastic command derives all randomness from --seed via named sub-streams
and records a run manifest next to its outputs.
"""

from __future__ import annotations

import os

# Must happen before numpy is first imported anywhere in the process.
_threads = os.environ.get("TACSEG_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import dataclasses
import json
import sys
import time

import numpy as np

from . import __version__, recdata, synthgen
from .errors import TacsegError, UsageError
from .featfuse import BLOCKS, FusedSequence, fit_norm, fuse_recording, raw_norm_block, zscore
from .recdata import COMMON_RATE_HZ
from .segmenter import (
    evaluate,
    render_timeline_svg,
    save_metrics_json,
    save_per_class_csv,
    save_prediction,
    segment_sequence,
    summary_line,
)
from .seqmodels import ARCHS, ModelConfig, load_checkpoint, save_checkpoint
from .synthgen import SKILL_VOCAB, TRIGGER_VOCAB, SynthConfig
from .trainer import TrainConfig, train
from .wrenchproc import (
    baseline_stats,
    detect_trigger_intervals,
    filter_trigger_artifacts,
    load_intervals_csv,
    save_intervals_csv,
)

_RATE_SNAP_TOL = 0.05


def _resolve_rate(value: float) -> float:
    """Snap near-16.67 Hz requests to the exact rational 50/3."""
    if abs(value * 3.0 - 50.0) < _RATE_SNAP_TOL:
        return COMMON_RATE_HZ
    return value


def _parse_modalities(text: str) -> tuple:
    names = tuple(t.strip() for t in text.split(",") if t.strip())
    unknown = set(names) - set(BLOCKS)
    if unknown:
        raise UsageError(f"unknown modalities {sorted(unknown)}; "
                         f"choose from {sorted(BLOCKS)}")
    if not names:
        raise UsageError("at least one modality is required")
    return names


def _write_manifest(out_dir, command: str, config: dict, inputs, outputs,
                    seed, started: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": sorted(os.fspath(p) for p in inputs),
        "outputs": sorted(os.fspath(p) for p in outputs),
        "seed": seed,
        "tool_version": __version__,
        "duration_s": round(time.time() - started, 3),
    }
    path = os.path.join(out_dir, "run_manifest.json")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_skill_split(root, split: str, stats=None, keep=None):
    """Fused sequences for one split; fits norm stats when not given."""
    pairs = synthgen.load_split(root, split)
    if stats is None:
        stats = fit_norm([raw_norm_block(rec) for rec, _ in pairs])
    seqs = [fuse_recording(rec, stats, keep=keep) for rec, _ in pairs]
    return seqs, stats


def load_trigger_split(root, split: str, stats=None):
    """Z-scored raw F/T sequences labeled with the trigger track."""
    pairs = synthgen.load_split(root, split)
    if stats is None:
        stats = fit_norm([rec.streams["ft"].values for rec, _ in pairs])
    seqs = [FusedSequence(zscore(rec.streams["ft"].values, stats),
                          labels=gt.triggers, source=rec.name)
            for rec, gt in pairs]
    return seqs, stats


def cmd_synth(args) -> int:
    started = time.time()
    fractions = (args.train_frac, args.val_frac, args.test_frac)
    cfg = SynthConfig(seed=args.seed, clips_per_demo=args.clips,
                      rate_hz=_resolve_rate(args.rate_hz))
    try:
        cfg.validate()
        synthgen.split_counts(args.demos, fractions)
    except TacsegError as exc:
        raise UsageError(str(exc)) from exc
    splits = synthgen.save_dataset(cfg, args.demos, fractions, args.out)
    _write_manifest(args.out, "synth",
                    {"demos": args.demos, "clips": args.clips,
                     "fractions": list(fractions), "rate_hz": cfg.rate_hz},
                    [], [os.path.join(args.out, n) for ns in splits.values()
                         for n in ns],
                    args.seed, started)
    print(f"wrote {args.demos} demos to {args.out} "
          f"(train/val/test = {'/'.join(str(len(v)) for v in splits.values())})")
    return 0


def cmd_ft_filter(args) -> int:
    started = time.time()
    rec = recdata.load_recording(args.rec)
    ft_stream = rec.stream_of_kind("ft")
    stats = baseline_stats(ft_stream.values)
    if args.intervals:
        intervals = load_intervals_csv(args.intervals)
    else:
        model, norm = load_checkpoint(args.checkpoint, expect_classes=4)
        if norm is None:
            raise TacsegError(f"{args.checkpoint} lacks normalization stats")
        feats = zscore(ft_stream.values, norm)
        intervals = detect_trigger_intervals(feats, model,
                                             window=args.window,
                                             stride=args.stride)
    cleaned = filter_trigger_artifacts(ft_stream.values, intervals, stats,
                                       seed=args.seed, pad=args.pad)
    streams = dict(rec.streams)
    streams[ft_stream.name] = dataclasses.replace(ft_stream, values=cleaned)
    out_rec = dataclasses.replace(rec, streams=streams)
    os.makedirs(args.out, exist_ok=True)
    recdata.save_recording(out_rec, args.out)
    csv_path = os.path.join(args.out, "detected_intervals.csv")
    save_intervals_csv(intervals, csv_path)
    _write_manifest(args.out, "ft-filter",
                    {"pad": args.pad, "oracle": bool(args.intervals)},
                    [args.rec], [args.out, csv_path], args.seed, started)
    print(f"filtered {len(intervals)} intervals -> {args.out}")
    return 0


def _resolve_train_flags(args):
    max_idle = args.max_idle_ratio
    if max_idle is None:
        # The idle-discard rule is a skill-pipeline rule; trigger frames are
        # mostly background so that pipeline keeps every window by default.
        max_idle = 1.0 if args.pipeline == "triggers" else 0.8
    return TrainConfig(
        epochs_max=args.epochs, patience=args.patience, lr0=args.lr,
        batch=args.batch, seed=args.seed, window=args.window,
        stride=args.stride, max_idle_ratio=max_idle)


def cmd_train(args) -> int:
    started = time.time()
    keep = _parse_modalities(args.modalities)
    tc = _resolve_train_flags(args)
    if args.pipeline == "skills":
        train_seqs, stats = load_skill_split(args.data, "train", keep=keep)
        val_seqs, _ = load_skill_split(args.data, "val", stats=stats, keep=keep)
        vocabulary = SKILL_VOCAB
        input_dim = 532
    else:
        train_seqs, stats = load_trigger_split(args.data, "train")
        val_seqs, _ = load_trigger_split(args.data, "val", stats=stats)
        vocabulary = TRIGGER_VOCAB
        input_dim = 6
    mc = ModelConfig(arch=args.arch, num_classes=len(vocabulary),
                     input_dim=input_dim)
    model, report = train(tc, train_seqs, val_seqs, mc, vocabulary=vocabulary)
    model.norm_stats = stats.to_dict()
    os.makedirs(args.out, exist_ok=True)
    ckpt_path = os.path.join(args.out, "model.tsck")
    report_path = os.path.join(args.out, "train_report.jsonl")
    save_checkpoint(model, stats, ckpt_path)
    report.save_jsonl(report_path)
    _write_manifest(args.out, "train",
                    {"arch": args.arch, "pipeline": args.pipeline,
                     "modalities": list(keep), "epochs": args.epochs,
                     "patience": args.patience, "lr": args.lr,
                     "batch": args.batch, "window": args.window,
                     "stride": args.stride,
                     "max_idle_ratio": tc.max_idle_ratio},
                    [args.data], [ckpt_path, report_path], args.seed, started)
    print(f"best epoch {report.best_epoch} "
          f"(val accuracy {report.best_accuracy:.4f}) -> {ckpt_path}")
    return 0


def cmd_eval(args) -> int:
    started = time.time()
    keep = _parse_modalities(args.modalities)
    model, stats = load_checkpoint(args.checkpoint)
    if stats is None:
        raise TacsegError(f"{args.checkpoint} lacks normalization stats")
    pairs = synthgen.load_split(args.data, args.split)
    if model.config.input_dim == 6:
        seqs = [FusedSequence(zscore(rec.streams["ft"].values, stats),
                              labels=gt.triggers, source=rec.name)
                for rec, gt in pairs]
    else:
        seqs = [fuse_recording(rec, stats, keep=keep) for rec, _ in pairs]
    vocab = model.vocabulary
    truth = np.concatenate([s.labels for s in seqs])
    pred_labels = []
    for seq in seqs:
        pred = segment_sequence(model, seq, window=args.window,
                                stride=args.stride)
        pred_labels.append(pred.labels)
    pred_labels = np.concatenate(pred_labels)
    metrics = evaluate(pred_labels, recdata.LabelTrack(vocab, truth))
    os.makedirs(args.out, exist_ok=True)
    json_path = os.path.join(args.out, "metrics.json")
    csv_path = os.path.join(args.out, "per_class.csv")
    save_metrics_json(metrics, json_path)
    save_per_class_csv(metrics, csv_path)
    _write_manifest(args.out, "eval",
                    {"split": args.split, "modalities": list(keep),
                     "window": args.window, "stride": args.stride},
                    [args.data, args.checkpoint], [json_path, csv_path],
                    args.seed, started)
    print(summary_line(metrics))
    return 0


def cmd_infer(args) -> int:
    started = time.time()
    keep = _parse_modalities(args.modalities)
    model, stats = load_checkpoint(args.checkpoint)
    if stats is None:
        raise TacsegError(f"{args.checkpoint} lacks normalization stats")
    rec = recdata.load_recording(args.rec)
    if model.config.input_dim == 6:
        seq = FusedSequence(zscore(rec.stream_of_kind("ft").values, stats),
                            source=rec.name)
    else:
        seq = fuse_recording(rec, stats, keep=keep)
    vocab = model.vocabulary
    pred = segment_sequence(model, seq, window=args.window, stride=args.stride)
    os.makedirs(args.out, exist_ok=True)
    probs_path = os.path.join(args.out, "prediction.tsm1")
    csv_path = os.path.join(args.out, "prediction.csv")
    svg_path = os.path.join(args.out, "timeline.svg")
    save_prediction(pred, vocab, probs_path, csv_path)
    render_timeline_svg(pred.labels, vocab, svg_path)
    _write_manifest(args.out, "infer",
                    {"modalities": list(keep), "window": args.window,
                     "stride": args.stride},
                    [args.rec, args.checkpoint],
                    [probs_path, csv_path, svg_path], args.seed, started)
    print(f"wrote prediction for {len(pred)} frames -> {args.out}")
    return 0


def _add_common(sub, out_required: bool = True):
    sub.add_argument("--out", required=out_required, help="output directory")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--window", type=int, default=50)
    sub.add_argument("--stride", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tacseg",
        description="Skill segmentation for multi-modal manipulation demos")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--demos", type=int, default=synthgen.DEFAULT_DEMOS)
    p.add_argument("--clips", type=int, default=3)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--test-frac", type=float, default=0.1)
    p.add_argument("--rate-hz", type=float, default=COMMON_RATE_HZ)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("ft-filter",
                        help="replace trigger artifacts in the F/T stream")
    _add_common(p)
    p.add_argument("--rec", required=True, help="input recording directory")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--intervals", help="oracle intervals CSV")
    group.add_argument("--checkpoint", help="trained 4-class trigger model")
    p.add_argument("--pad", type=int, default=2)
    p.set_defaults(func=cmd_ft_filter)

    p = subs.add_parser("train", help="fit a segmentation model")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset root (splits.json)")
    p.add_argument("--arch", choices=ARCHS, default="bilstm")
    p.add_argument("--pipeline", choices=("skills", "triggers"),
                   default="skills")
    p.add_argument("--modalities", default="camera,tactile,ft,pose")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--max-idle-ratio", type=float, default=None)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("eval", help="score a checkpoint on a dataset split")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--modalities", default="camera,tactile,ft,pose")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("infer", help="segment one recording")
    _add_common(p)
    p.add_argument("--rec", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--modalities", default="camera,tactile,ft,pose")
    p.set_defaults(func=cmd_infer)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TacsegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
