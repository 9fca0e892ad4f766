"""Bit-exact persistent store for id-keyed feature vectors.

Layout (all integers little-endian):

  bytes 0..3    magic, ASCII "FVS1"
  bytes 4..7    u32  dim, entries per vector (>= 1)
  bytes 8..15   u64  count, number of records
  then count records, each:
      u16  id byte length
      id, UTF-8
      dim x f32 IEEE-754 values

Values persist as 32-bit floats; write followed by read reproduces ids
and every stored value bit-exactly. The block functions operate on open
binary streams so other artifacts (trained-head files) can embed blocks.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import CorruptionError, DimensionError, FormatError

MAGIC = b"FVS1"
_HEADER = struct.Struct("<4sIQ")
_IDLEN = struct.Struct("<H")
MAX_ID_BYTES = 0xFFFF


def write_block(fp: BinaryIO, ids: list[str], matrix: np.ndarray) -> int:
    """Write one store block to an open stream. Returns bytes written."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise DimensionError(f"feature matrix must be 2-D, got shape {matrix.shape}")
    rows, dim = matrix.shape
    if dim < 1:
        raise DimensionError("feature dimension must be >= 1")
    if len(ids) != rows:
        raise DimensionError(f"{len(ids)} ids for {rows} matrix rows")
    data = np.ascontiguousarray(matrix, dtype="<f4")

    written = fp.write(_HEADER.pack(MAGIC, dim, rows))
    for i, image_id in enumerate(ids):
        id_bytes = image_id.encode("utf-8")
        if len(id_bytes) > MAX_ID_BYTES:
            raise FormatError(f"id at row {i} exceeds {MAX_ID_BYTES} UTF-8 bytes")
        written += fp.write(_IDLEN.pack(len(id_bytes)))
        written += fp.write(id_bytes)
        written += fp.write(data[i].tobytes())
    return written


def read_block(fp: BinaryIO) -> tuple[list[str], np.ndarray]:
    """Read one store block from an open stream."""
    header = fp.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise FormatError("truncated header")
    magic, dim, count = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if dim < 1:
        raise FormatError(f"header dim must be >= 1, got {dim}")

    ids: list[str] = []
    rows: list[np.ndarray] = []
    vec_bytes = dim * 4
    for i in range(count):
        raw = fp.read(_IDLEN.size)
        if len(raw) < _IDLEN.size:
            raise CorruptionError(
                f"header count={count} but record {i} is missing", record_index=i
            )
        (id_len,) = _IDLEN.unpack(raw)
        id_raw = fp.read(id_len)
        if len(id_raw) < id_len:
            raise CorruptionError(f"record {i}: truncated id", record_index=i)
        values = fp.read(vec_bytes)
        if len(values) < vec_bytes:
            raise CorruptionError(f"record {i}: truncated vector", record_index=i)
        ids.append(id_raw.decode("utf-8"))
        rows.append(np.frombuffer(values, dtype="<f4"))
    if rows:
        matrix = np.vstack(rows)
    else:
        matrix = np.empty((0, dim), dtype="<f4")
    return ids, matrix


def feature_store_write(ids: list[str], matrix: np.ndarray, path: str | Path) -> int:
    """Write a store file; rows land in input order. Returns bytes written."""
    with open(path, "wb") as fp:
        return write_block(fp, ids, matrix)


def feature_store_read(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a store file written by feature_store_write."""
    with open(path, "rb") as fp:
        ids, matrix = read_block(fp)
        trailing = fp.read(1)
        if trailing:
            raise CorruptionError(
                f"{len(ids)} records read but file has trailing bytes",
                record_index=len(ids),
            )
    return ids, matrix
