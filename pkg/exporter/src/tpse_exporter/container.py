"""Writer/reader for the TPSE container consumed by the protoshift engine.

The byte layout is the engine's normative external interface and is
re-implemented here so the exporter stays a standalone package:
magic "TPSE", u16 version=1, u8 dtype=0 (float32), u8 flags=0, u64 rows,
u64 cols, then row-major little-endian float32 payload. Files are written
atomically (temp file + rename).
"""

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"TPSE"
VERSION = 1
HEADER = struct.Struct("<4sHBBQQ")


class ContainerError(ValueError):
    pass


def write_tpse(mat: np.ndarray, path) -> None:
    mat = np.asarray(mat)
    if mat.ndim != 2:
        raise ContainerError(f"expected a 2-D matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ContainerError("matrix contains NaN or Inf")
    path = Path(path)
    payload = np.ascontiguousarray(mat, dtype="<f4").tobytes()
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(HEADER.pack(MAGIC, VERSION, 0, 0, mat.shape[0], mat.shape[1]))
            fh.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def read_tpse(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise ContainerError(f"{path}: shorter than the {HEADER.size}-byte header")
    magic, version, dtype, flags, rows, cols = HEADER.unpack_from(data, 0)
    if magic != MAGIC or version != VERSION or dtype != 0 or flags != 0:
        raise ContainerError(f"{path}: bad header fields")
    if len(data) - HEADER.size != rows * cols * 4:
        raise ContainerError(f"{path}: payload size does not match header")
    flat = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=HEADER.size)
    return flat.astype(np.float64).reshape(rows, cols)
