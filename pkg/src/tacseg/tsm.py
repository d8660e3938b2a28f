"""TSM1 binary matrix files.

Layout (little-endian): magic ``TSM1``, u32 rows, u32 cols, u8 dtype code
(1 = float32, 2 = float64), then the row-major payload. Used for sensor
streams, embeddings, label tracks, predictions, and checkpoint tensor blobs.
"""

from __future__ import annotations

import io
import os
import struct

import numpy as np

from .errors import FormatError, MissingFile

MAGIC = b"TSM1"
_HEADER = struct.Struct("<4sIIB")

_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_FOR = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


def pack_matrix(mat: np.ndarray) -> bytes:
    """Serialize a 1-D or 2-D float array (1-D becomes a single column)."""
    arr = np.asarray(mat)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise FormatError(f"TSM1 stores 2-D matrices, got ndim={arr.ndim}")
    if arr.dtype not in _CODE_FOR:
        arr = arr.astype(np.float64)
    code = _CODE_FOR[arr.dtype]
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, arr.shape[0], arr.shape[1], code))
    buf.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())
    return buf.getvalue()


def unpack_matrix(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise FormatError("TSM1 blob shorter than header")
    magic, rows, cols, code = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if code not in _DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code}")
    dtype = _DTYPE_CODES[code]
    need = _HEADER.size + rows * cols * dtype.itemsize
    if len(data) != need:
        raise FormatError(f"payload size {len(data)} != expected {need}")
    flat = np.frombuffer(data, dtype=dtype, offset=_HEADER.size)
    return flat.reshape(rows, cols).copy()


def read_matrix_from(fh) -> np.ndarray:
    """Read exactly one TSM1 blob from an open binary stream."""
    header = fh.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise FormatError("TSM1 blob shorter than header")
    magic, rows, cols, code = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if code not in _DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code}")
    payload = fh.read(rows * cols * _DTYPE_CODES[code].itemsize)
    return unpack_matrix(header + payload)


def write_matrix(path: str | os.PathLike, mat: np.ndarray) -> None:
    """Write atomically: temp file in the same directory, then rename."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(pack_matrix(mat))
    os.replace(tmp, path)


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    path = os.fspath(path)
    if not os.path.exists(path):
        raise MissingFile(path)
    with open(path, "rb") as fh:
        return unpack_matrix(fh.read())
