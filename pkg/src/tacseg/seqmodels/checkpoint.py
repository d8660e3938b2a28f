"""Model checkpoints.

Layout (little-endian): magic ``TSCK``, u16 format version, u32 JSON header
length, JSON header (config, normalization stats, vocabulary, init seed),
then one record per tensor: u16 name length, UTF-8 name, TSM1 blob. Tensors
are stored float64 so a save/load round trip is bit-exact. Rank-1 tensors
are written as a single row and rank-3 conv kernels (K, Cin, Cout) as
(K*Cin, Cout); the loader restores shapes from the config-derived registry.
"""

from __future__ import annotations

import io
import json
import os
import struct

import numpy as np

from ..errors import ConfigError, FormatError, VocabularyMismatch
from ..tsm import pack_matrix, read_matrix_from
from .config import ModelConfig
from .model import SeqModel, param_registry

MAGIC = b"TSCK"
VERSION = 1
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")


def _flatten(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 1:
        return arr[None, :]
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3:
        return arr.reshape(arr.shape[0] * arr.shape[1], arr.shape[2])
    raise FormatError(f"cannot store rank-{arr.ndim} tensor")


def save_checkpoint(model: SeqModel, norm_stats, path: str | os.PathLike) -> None:
    """Write the model (and optional NormStats) atomically to ``path``."""
    header = {
        "config": model.config.to_dict(),
        "norm_stats": None if norm_stats is None else norm_stats.to_dict(),
        "vocabulary": list(model.vocabulary),
        "seed": model.seed,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(_U16.pack(VERSION))
    buf.write(_U32.pack(len(blob)))
    buf.write(blob)
    for name in sorted(model.params):
        encoded = name.encode("utf-8")
        buf.write(_U16.pack(len(encoded)))
        buf.write(encoded)
        buf.write(pack_matrix(_flatten(np.asarray(model.params[name],
                                                  dtype=np.float64))))
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike, expect_arch: str | None = None,
                    expect_classes: int | None = None):
    """Read a checkpoint; returns (SeqModel, NormStats or None).

    ``expect_arch`` / ``expect_classes`` let callers reject checkpoints that
    do not fit their pipeline before any tensor is touched.
    """
    from ..featfuse import NormStats

    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}")
        version = _U16.unpack(fh.read(_U16.size))[0]
        if version != VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        header_len = _U32.unpack(fh.read(_U32.size))[0]
        try:
            header = json.loads(fh.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"corrupt checkpoint header: {exc}") from exc
        cfg = ModelConfig.from_dict(header["config"])
        if expect_arch is not None and cfg.arch != expect_arch:
            raise ConfigError(
                f"checkpoint holds a {cfg.arch} model, expected {expect_arch}")
        if expect_classes is not None and cfg.num_classes != expect_classes:
            raise VocabularyMismatch(
                f"checkpoint has {cfg.num_classes} classes, "
                f"pipeline expects {expect_classes}")
        vocabulary = tuple(header["vocabulary"])
        if len(vocabulary) != cfg.num_classes:
            raise FormatError("vocabulary length disagrees with config")
        registry = param_registry(cfg)
        params = {}
        while True:
            raw = fh.read(_U16.size)
            if not raw:
                break
            name_len = _U16.unpack(raw)[0]
            name = fh.read(name_len).decode("utf-8")
            mat = read_matrix_from(fh)
            if name not in registry:
                raise FormatError(f"unexpected tensor {name!r} in checkpoint")
            shape = registry[name]
            if mat.size != int(np.prod(shape)):
                raise FormatError(
                    f"tensor {name!r} has {mat.size} values, expected shape {shape}")
            params[name] = np.ascontiguousarray(mat, dtype=np.float64).reshape(shape)
        missing = sorted(set(registry) - set(params))
        if missing:
            raise FormatError(f"checkpoint missing tensors: {missing}")
    stats = None
    if header.get("norm_stats") is not None:
        stats = NormStats.from_dict(header["norm_stats"])
    model = SeqModel(config=cfg, params=params, seed=int(header["seed"]),
                     vocabulary=vocabulary)
    return model, stats
