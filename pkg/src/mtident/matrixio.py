"""Plain-text matrix files: first line ``rows cols``, then row-major values."""

from __future__ import annotations

import os

import numpy as np


def write_matrix(path: str | os.PathLike, M: np.ndarray) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{M.shape[0]} {M.shape[1]}\n")
        for row in M:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected 'rows cols' header")
        rows, cols = int(header[0]), int(header[1])
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (rows, cols):
        # loadtxt collapses single rows; re-shape against the header
        if data.size != rows * cols:
            raise ValueError(f"{path}: header says {rows}x{cols}, found {data.size} values")
        data = data.reshape(rows, cols)
    return data


def write_vector(path: str | os.PathLike, v: np.ndarray) -> None:
    write_matrix(path, np.asarray(v, dtype=float).reshape(-1, 1))


def read_vector(path: str | os.PathLike) -> np.ndarray:
    M = read_matrix(path)
    if 1 not in M.shape:
        raise ValueError(f"{path}: expected a vector, got shape {M.shape}")
    return M.reshape(-1)
