"""On-disk formats for gathered fields.

``SFG1`` binary: the four bytes ``SFG1``, then ``nx, ny, nz`` as 64-bit
little-endian integers, then ``nx*ny*nz`` little-endian IEEE-754 doubles with
x varying fastest.
"""

from __future__ import annotations

import csv
import struct

import numpy as np

__all__ = ["write_sfg1", "read_sfg1", "write_csv_slice", "SFG1_MAGIC"]

SFG1_MAGIC = b"SFG1"
_HEADER = struct.Struct("<4sqqq")


def write_sfg1(path, array: np.ndarray) -> None:
    array = np.asarray(array, dtype="<f8")
    if array.ndim != 3:
        raise ValueError("SFG1 holds 3D arrays")
    nx, ny, nz = array.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SFG1_MAGIC, nx, ny, nz))
        fh.write(array.tobytes(order="F"))


def read_sfg1(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated SFG1 header")
        magic, nx, ny, nz = _HEADER.unpack(head)
        if magic != SFG1_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != nx * ny * nz:
        raise ValueError(f"{path}: expected {nx * ny * nz} values, found {data.size}")
    return data.reshape((nx, ny, nz), order="F").astype(np.float64)


def write_csv_slice(path, array: np.ndarray, axis: int = 2, index: int | None = None) -> None:
    """Write one plane of ``array`` as ``i,j,k,value`` rows (all planes if ``index`` is None)."""
    array = np.asarray(array)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "k", "value"])
        for (i, j, k), v in np.ndenumerate(array):
            if index is not None and (i, j, k)[axis] != index:
                continue
            w.writerow([i, j, k, repr(float(v))])
