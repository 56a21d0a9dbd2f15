"""Shapes, vectorized factor matrices and dense tensors.

A rank-``r`` decomposition of an ``n_1 x ... x n_d`` tensor is stored as one
flat vector ``p`` of length ``M = r * (Sigma + d)``.  The vector is made of
``r`` consecutive blocks, one per rank-1 term, and block ``i`` is the
concatenation ``(a_i^1; a_i^2; ...; a_i^d)``.  This is the ``vecr`` layout.

Dense tensors are flat vectors in Kronecker order: the first index varies
slowest and the last index fastest, which is numpy's C order for an array
of shape ``dims``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, ShapeError


@dataclass(frozen=True)
class Shape:
    """Tensor dimensions together with the number of rank-1 terms."""

    dims: tuple[int, ...]
    rank: int

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "rank", int(self.rank))
        if len(dims) < 2:
            raise ShapeError(f"order must be at least 2, got dims={dims}")
        if any(n < 2 for n in dims):
            raise ShapeError(f"every dimension must be >= 2, got dims={dims}")
        if self.rank < 1:
            raise ShapeError(f"rank must be >= 1, got {self.rank}")

    @property
    def order(self) -> int:
        return len(self.dims)

    @property
    def sigma(self) -> int:
        """Sum of ``n_k - 1``."""
        return sum(n - 1 for n in self.dims)

    @property
    def pi(self) -> int:
        """Number of tensor entries."""
        return int(np.prod(self.dims))

    @property
    def n_free(self) -> int:
        """Expected rank of Terracini's matrix, ``r (Sigma + 1)``."""
        return self.rank * (self.sigma + 1)

    @property
    def n_params(self) -> int:
        """Length of the vectorized factor matrices, ``r (Sigma + d)``."""
        return self.rank * (self.sigma + self.order)

    @property
    def block(self) -> int:
        """Length of one term block, ``Sigma + d``."""
        return sum(self.dims)

    @property
    def offsets(self) -> tuple[int, ...]:
        """Start of each factor vector inside a term block (length d + 1)."""
        return tuple(int(x) for x in np.concatenate(([0], np.cumsum(self.dims))))

    def is_subgeneric(self) -> bool:
        return self.n_free <= self.pi

    def with_rank(self, rank: int) -> "Shape":
        return Shape(self.dims, rank)


Representative = tuple  # d one-dimensional arrays, a^(1), ..., a^(d)


def _as_vectors(rep) -> tuple[np.ndarray, ...]:
    vecs = tuple(np.asarray(a, dtype=float).reshape(-1) for a in rep)
    if not vecs or any(v.size == 0 for v in vecs):
        raise ShapeError("a representative needs d nonempty vectors")
    return vecs


class Params:
    """Vectorized factor matrices ``p = vecr(b_1, ..., b_r)``.

    Instances are immutable; ``data`` is a read-only view.
    """

    __slots__ = ("shape", "data")

    def __init__(self, shape: Shape, data):
        arr = np.array(data, dtype=float).reshape(-1)
        if arr.size != shape.n_params:
            raise ShapeError(
                f"expected {shape.n_params} parameters for {shape}, got {arr.size}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Params is immutable")

    def __repr__(self):
        return f"Params(dims={self.shape.dims}, rank={self.shape.rank})"

    def __len__(self):
        return self.data.size

    @classmethod
    def from_factors(cls, factors: Sequence) -> "Params":
        """Build from factor matrices ``A_k`` of shape ``(n_k, r)``."""
        mats = [np.asarray(f, dtype=float) for f in factors]
        mats = [m.reshape(-1, 1) if m.ndim == 1 else m for m in mats]
        ranks = {m.shape[1] for m in mats}
        if len(ranks) != 1:
            raise ShapeError(f"factor matrices disagree on rank: {sorted(ranks)}")
        shape = Shape(tuple(m.shape[0] for m in mats), ranks.pop())
        blocks = [np.concatenate([m[:, i] for m in mats]) for i in range(shape.rank)]
        return cls(shape, np.concatenate(blocks))

    def factors(self) -> list[np.ndarray]:
        """Factor matrices ``A_k`` (``n_k x r``), freshly allocated."""
        blocks = self.data.reshape(self.shape.rank, self.shape.block)
        off = self.shape.offsets
        return [blocks[:, off[k]:off[k + 1]].T.copy() for k in range(self.shape.order)]

    def term(self, i: int) -> tuple[np.ndarray, ...]:
        """The representative ``b_i`` as d read-only vectors."""
        b = self.shape.block
        blk = self.data[i * b:(i + 1) * b]
        off = self.shape.offsets
        return tuple(blk[off[k]:off[k + 1]] for k in range(self.shape.order))

    def terms(self) -> list[tuple[np.ndarray, ...]]:
        return [self.term(i) for i in range(self.shape.rank)]

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def replace(self, data) -> "Params":
        return Params(self.shape, data)

    def __add__(self, other):
        other = other.data if isinstance(other, Params) else np.asarray(other, dtype=float)
        return Params(self.shape, self.data + other)

    def __sub__(self, other):
        other = other.data if isinstance(other, Params) else np.asarray(other, dtype=float)
        return Params(self.shape, self.data - other)


def vecr(reps: Sequence, shape: Shape) -> Params:
    """Concatenate ``r`` representatives term-major, factor-minor."""
    if len(reps) != shape.rank:
        raise ShapeError(f"expected {shape.rank} representatives, got {len(reps)}")
    parts = []
    for rep in reps:
        vecs = _as_vectors(rep)
        if tuple(v.size for v in vecs) != shape.dims:
            raise ShapeError(
                f"representative dims {tuple(v.size for v in vecs)} != {shape.dims}"
            )
        parts.extend(vecs)
    return Params(shape, np.concatenate(parts))


def unvecr(p: Params) -> list[tuple[np.ndarray, ...]]:
    """Inverse of :func:`vecr`; returns copies."""
    return [tuple(a.copy() for a in t) for t in p.terms()]


@dataclass(frozen=True, eq=False)
class DenseTensor:
    dims: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.size != int(np.prod(dims)):
            raise ShapeError(f"{vals.size} values do not fill dims {dims}")
        vals.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_array(cls, arr) -> "DenseTensor":
        arr = np.asarray(arr, dtype=float)
        return cls(arr.shape, arr.reshape(-1))

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.dims)

    def linear_index(self, idx: Sequence[int]) -> int:
        lin = 0
        for i, n in zip(idx, self.dims):
            lin = lin * n + int(i)
        return lin

    def entry(self, idx: Sequence[int]) -> float:
        if len(idx) != len(self.dims) or any(not 0 <= i < n for i, n in zip(idx, self.dims)):
            raise ShapeError(f"index {tuple(idx)} out of range for dims {self.dims}")
        return float(self.values[self.linear_index(idx)])

    def __sub__(self, other: "DenseTensor") -> "DenseTensor":
        if self.dims != other.dims:
            raise ShapeError(f"dims {self.dims} != {other.dims}")
        return DenseTensor(self.dims, self.values - other.values)

    def scaled(self, beta: float) -> "DenseTensor":
        return DenseTensor(self.dims, beta * self.values)


def kron_all(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Repeated Kronecker product ``v_1 (x) v_2 (x) ... (x) v_d``."""
    return reduce(np.kron, vectors)


def rank_one(rep) -> DenseTensor:
    """Evaluate the Segre map on one representative."""
    vecs = _as_vectors(rep)
    return DenseTensor(tuple(v.size for v in vecs), kron_all(vecs))


def cpdgen(p: Params) -> DenseTensor:
    """Tensor represented by ``p``.

    Terms are accumulated one after another in index order, so the result is
    reproducible bit for bit.
    """
    acc = np.zeros(p.shape.pi)
    for rep in p.terms():
        acc += kron_all(rep)
    return DenseTensor(p.shape.dims, acc)


def frobenius_norm(t: DenseTensor) -> float:
    return float(np.linalg.norm(t.values))


def check_nonzero_factors(p: Params) -> None:
    for i, rep in enumerate(p.terms()):
        for k, a in enumerate(rep):
            if not np.any(a):
                raise DegenerateInputError(f"factor vector {k + 1} of term {i + 1} is zero")
