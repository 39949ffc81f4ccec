"""TPSE embedding container: a fixed little-endian binary matrix format.

Layout (all little-endian):
    offset 0   magic            4 bytes, ASCII "TPSE"
    offset 4   version          u16, must be 1
    offset 6   dtype            u8, 0 = float32
    offset 7   flags            u8, reserved, must be 0
    offset 8   rows             u64
    offset 16  cols             u64
    offset 24  payload          rows * cols float32, row-major

Bytes written on any machine parse identically everywhere. Storage is
32-bit; matrices are promoted to float64 on read.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, NonFinite

MAGIC = b"TPSE"
VERSION = 1
DTYPE_F32 = 0
HEADER = struct.Struct("<4sHBBQQ")
HEADER_SIZE = HEADER.size  # 24 bytes


def write_tpse(mat: np.ndarray, path) -> None:
    """Write a 2-D matrix; values are stored as float32."""
    mat = np.asarray(mat)
    if mat.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise NonFinite("matrix contains NaN or Inf")
    rows, cols = mat.shape
    payload = np.ascontiguousarray(mat, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, DTYPE_F32, 0, rows, cols))
        fh.write(payload)


def read_tpse(path) -> np.ndarray:
    """Read a container back as a float64 matrix, validating every field."""
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise FormatError(
            f"file is {len(data)} bytes, shorter than the {HEADER_SIZE}-byte header",
            offset=len(data),
        )
    magic, version, dtype, flags, rows, cols = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}", offset=4)
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported dtype code {dtype}, expected {DTYPE_F32}", offset=6)
    if flags != 0:
        raise FormatError(f"reserved flags byte is {flags}, expected 0", offset=7)
    expected = rows * cols * 4
    actual = len(data) - HEADER_SIZE
    if actual < expected:
        raise FormatError(
            f"payload is {actual} bytes, header promises {expected}",
            offset=len(data),
        )
    if actual > expected:
        raise FormatError(
            f"{actual - expected} trailing bytes after the payload",
            offset=HEADER_SIZE + expected,
        )
    flat = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=HEADER_SIZE)
    mat = flat.astype(np.float64).reshape(rows, cols)
    if not np.all(np.isfinite(mat)):
        bad = int(np.flatnonzero(~np.isfinite(mat.reshape(-1)))[0])
        raise FormatError(f"non-finite value at element {bad}", offset=HEADER_SIZE + 4 * bad)
    return mat
