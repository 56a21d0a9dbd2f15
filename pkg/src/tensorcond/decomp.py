"""Kruskal identifiability check and a direct GEVD decomposition for order 3."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CapabilityError, DecompositionError, ShapeError
from .rng import SeededRng
from .tensor import DenseTensor, Params

MAX_KRUSKAL_COLUMNS = 12
PENCIL_COND_LIMIT = 1e12


@dataclass(frozen=True)
class KruskalInfo:
    k_ranks: tuple[int, ...]
    rank: int
    bound: float
    satisfied: bool


def kruskal_rank(M, tol: float = 1e-10) -> int:
    """Largest ``k`` such that every set of ``k`` columns is independent.

    A subset counts as independent when its smallest singular value exceeds
    ``tol`` times its largest.  Enumerates subsets, so ``r`` is capped at 12.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ShapeError("expected a matrix")
    r = M.shape[1]
    if r > MAX_KRUSKAL_COLUMNS:
        raise CapabilityError(f"k-rank enumeration supports at most {MAX_KRUSKAL_COLUMNS} columns")
    krank = 0
    for k in range(1, min(r, M.shape[0]) + 1):
        for cols in itertools.combinations(range(r), k):
            s = np.linalg.svd(M[:, cols], compute_uv=False)
            if s[0] == 0 or s[-1] <= tol * s[0]:
                return krank
        krank = k
    return krank


def kruskal_check(factors, tol: float = 1e-10) -> KruskalInfo:
    """Kruskal's sufficient condition ``r <= (k_1 + k_2 + k_3 - 2) / 2``."""
    if isinstance(factors, Params):
        factors = factors.factors()
    mats = [np.asarray(f, dtype=float) for f in factors]
    if len(mats) != 3:
        raise CapabilityError("the Kruskal criterion is implemented for order-3 tensors only")
    r = mats[0].shape[1]
    ks = tuple(kruskal_rank(m, tol) for m in mats)
    bound = (sum(ks) - 2) / 2
    return KruskalInfo(ks, r, bound, r <= bound)


def _leading_left(mat: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    return u[:, :k], s


def _pencil_vectors(G1: np.ndarray, G2: np.ndarray) -> np.ndarray:
    # G_j = At diag(c_j) Bt^T, so G2 G1^{-1} = At diag(c_2 / c_1) At^{-1}.
    if np.linalg.cond(G1) > PENCIL_COND_LIMIT:
        raise DecompositionError("ill-conditioned pencil slice")
    M = np.linalg.solve(G1.T, G2.T).T
    w, X = scipy.linalg.eig(M)
    if np.any(np.abs(w.imag) > 1e-8 * np.maximum(np.abs(w), np.finfo(float).tiny)):
        raise DecompositionError("pencil has complex eigenvalues")
    X = np.real(X)
    if np.linalg.cond(X) > PENCIL_COND_LIMIT:
        raise DecompositionError("pencil is (nearly) defective")
    return X


def cpd_gevd(t: DenseTensor, r: int, *, seed: int = 0) -> Params:
    """Rank-``r`` decomposition of an order-3 tensor from one generalized eigenproblem.

    The tensor is compressed by truncated SVDs of its unfoldings to an
    ``r x r x 2`` core.  The eigenvectors of the two core slices give the
    first factor matrix; the other two factors follow from a least-squares
    solve and a rank-1 fit per term.  If the leading pencil is
    ill-conditioned the slices are mixed by a random rotation (seeded) and
    the solve is retried once.  Raises :class:`DecompositionError` when the
    pencil stays ill-conditioned, defective, or has complex eigenvalues.
    """
    dims = t.dims
    if len(dims) != 3:
        raise CapabilityError("cpd_gevd supports order-3 tensors only")
    n1, n2, n3 = dims
    if r < 1 or r > min(n1, n2):
        raise CapabilityError(f"rank {r} exceeds min(n1, n2) = {min(n1, n2)}")
    X = t.as_array()
    U1, _ = _leading_left(X.reshape(n1, -1), r)
    U2, _ = _leading_left(np.moveaxis(X, 1, 0).reshape(n2, -1), r)
    U3, _ = _leading_left(np.moveaxis(X, 2, 0).reshape(n3, -1), 2)
    core = np.einsum("ijk,ia,jb,kc->abc", X, U1, U2, U3)
    G1, G2 = core[:, :, 0], core[:, :, 1]
    try:
        V = _pencil_vectors(G1, G2)
    except DecompositionError:
        Q = SeededRng(seed).orthogonal(2)
        H1 = Q[0, 0] * G1 + Q[1, 0] * G2
        H2 = Q[0, 1] * G1 + Q[1, 1] * G2
        V = _pencil_vectors(H1, H2)

    A = U1 @ V
    A /= np.linalg.norm(A, axis=0)
    W = np.linalg.lstsq(A, X.reshape(n1, -1), rcond=None)[0]
    B = np.empty((n2, r))
    C = np.empty((n3, r))
    for i in range(r):
        u, s, vh = np.linalg.svd(W[i].reshape(n2, n3), full_matrices=False)
        B[:, i] = s[0] * u[:, 0]
        C[:, i] = vh[0]
    out = Params.from_factors([A, B, C])
    if not np.all(np.isfinite(out.data)):
        raise DecompositionError("non-finite factors")
    return out
