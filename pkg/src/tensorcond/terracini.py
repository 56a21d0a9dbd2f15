"""Terracini's matrix (the Jacobian of ``cpdgen``) and the basis of its kernel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .tensor import Params, Shape, check_nonzero_factors, kron_all

EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class TerraciniMatrix:
    shape: Shape
    matrix: np.ndarray  # Pi x r(Sigma + d)


@dataclass(frozen=True, eq=False)
class KernelBasis:
    shape: Shape
    matrix: np.ndarray  # r(Sigma + d) x r(d - 1)


def _term_block(rep) -> np.ndarray:
    # Columns for factor k: a^1 (x) .. (x) I_{n_k} (x) .. (x) a^d, built
    # by Kronecker products with the identity in slot k.
    cols = []
    for k, a in enumerate(rep):
        mats = [v.reshape(-1, 1) for v in rep]
        mats[k] = np.eye(a.size)
        cols.append(kron_all(mats))
    return np.hstack(cols)


def build_terracini(p: Params) -> TerraciniMatrix:
    """Dense Terracini matrix ``T_p = [T_1 ... T_r]``."""
    T = np.hstack([_term_block(rep) for rep in p.terms()])
    return TerraciniMatrix(p.shape, T)


def kernel_basis(p: Params) -> KernelBasis:
    """Analytic kernel basis: d-1 columns ``(a^1; 0; ..; -a^j; ..; 0)`` per term.

    Raises :class:`DegenerateInputError` when some factor vector is zero,
    since the columns are then no longer independent.
    """
    check_nonzero_factors(p)
    shape = p.shape
    d, b = shape.order, shape.block
    off = shape.offsets
    K = np.zeros((shape.n_params, shape.rank * (d - 1)))
    for i, rep in enumerate(p.terms()):
        base = i * b
        for j in range(1, d):
            col = i * (d - 1) + (j - 1)
            K[base + off[0]:base + off[1], col] = rep[0]
            K[base + off[j]:base + off[j + 1], col] = -rep[j]
    return KernelBasis(shape, K)


def singular_values(matrix: np.ndarray) -> np.ndarray:
    """All singular values, descending (LAPACK divide-and-conquer SVD)."""
    if matrix.size == 0:
        return np.zeros(0)
    return scipy.linalg.svd(matrix, compute_uv=False, lapack_driver="gesdd")


def right_singular_vectors(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Singular values and the full square matrix ``V`` (columns = right vectors)."""
    _, s, vh = scipy.linalg.svd(matrix, full_matrices=True, lapack_driver="gesvd")
    return s, vh.T


def rank_tolerance(matrix: np.ndarray, sigma_max: float) -> float:
    """Default numerical-rank cutoff ``max(m, n) * eps * sigma_1``."""
    return max(matrix.shape) * EPS * sigma_max


def numerical_rank(matrix: np.ndarray, tol: float | None = None) -> int:
    s = singular_values(matrix)
    if s.size == 0:
        return 0
    cutoff = rank_tolerance(matrix, s[0]) if tol is None else tol
    return int(np.sum(s > cutoff))
