"""Dense matrix helpers and seeded random initialization.

Matrices are plain 2-D float64 numpy arrays; vectors are ``(n, 1)`` columns.
The helpers here add the shape checking the rest of the package relies on
and never mutate their inputs.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

Matrix = np.ndarray

RNG_ALGORITHM = "numpy-PCG64"


class DimensionError(ValueError):
    """Raised when matrix shapes are incompatible."""


def as_matrix(values) -> Matrix:
    """Copy ``values`` into a fresh 2-D float64 array (1-D input becomes a column)."""
    m = np.array(values, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2 or m.size == 0:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    return m


def _check_same(a: Matrix, b: Matrix, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape {a.shape} does not match {b.shape}")


def matmul(a: Matrix, b: Matrix) -> Matrix:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


def hadamard(a: Matrix, b: Matrix) -> Matrix:
    _check_same(a, b, "hadamard")
    return a * b


def add(a: Matrix, b: Matrix) -> Matrix:
    _check_same(a, b, "add")
    return a + b


def add_col_broadcast(a: Matrix, bias: Matrix) -> Matrix:
    """Add the column ``bias`` to every column of ``a``."""
    if bias.ndim != 2 or bias.shape[1] != 1 or bias.shape[0] != a.shape[0]:
        raise DimensionError(
            f"add_col_broadcast: bias {bias.shape} does not fit matrix {a.shape}"
        )
    return a + bias


def map_elements(a: Matrix, f: Callable[[float], float]) -> Matrix:
    """Apply a scalar function element-wise (``np.vectorize`` semantics)."""
    return np.vectorize(f, otypes=[np.float64])(a)


class Rng:
    """Seeded random stream. Same seed, same draws."""

    algorithm = RNG_ALGORITHM

    def __init__(self, seed: int):
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low, high, size):
        return self.gen.uniform(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def choice(self, n: int, size: int) -> np.ndarray:
        return self.gen.choice(n, size=size, replace=False)

    def normal(self, size) -> np.ndarray:
        return self.gen.standard_normal(size)

    def integers(self, low, high, size=None):
        return self.gen.integers(low, high, size=size)

    def spawn_seed(self) -> int:
        return int(self.gen.integers(0, 2**63))


def init_weights(rows: int, cols: int, rng: Rng | None = None,
                 scheme: str = "uniform-scaled", constant: float = 0.0) -> Matrix:
    """Allocate a ``rows x cols`` matrix.

    ``scheme`` is one of ``"uniform-scaled"`` (Glorot bound
    ``sqrt(6 / (rows + cols))``), ``"zeros"`` or ``"constant"``.
    """
    if rows <= 0 or cols <= 0:
        raise DimensionError(f"init_weights: non-positive shape ({rows}, {cols})")
    if scheme == "zeros":
        return np.zeros((rows, cols))
    if scheme == "constant":
        return np.full((rows, cols), float(constant))
    if scheme == "uniform-scaled":
        if rng is None:
            raise ValueError("uniform-scaled initialization needs an Rng")
        s = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-s, s, (rows, cols))
    raise ValueError(f"unknown init scheme {scheme!r}")
