"""Seeded experiments on the conditioning of decompositions.

Every generator takes an explicit seed; nothing reads the clock.  The error
analysis follows one recipe for each sequence member ``s``:

1. build the true factors ``p_s`` and the tensor ``A_s = cpdgen(p_s)``;
2. decompose ``A_s`` with the supplied decomposer into ``p_hat``;
3. norm-balance both and record
   * ``backward``      ``||A_s - cpdgen(p_hat)|| / ||A_s||``,
   * ``forward_proxy`` ``||p_s - p_hat|| / ||p_s||`` after matching the terms
     (permutation from the orbit distance, signs per term),
   * ``orbit_forward`` orbit distance divided by ``||p_s||``,
   * ``kappa``         relative condition number at ``p_hat``,
   * ``bound``         ``kappa * backward``.

Decomposer failures are recorded in the row, not raised.
"""
from __future__ import annotations

import csv
import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Iterable, Sequence

import numpy as np

from .conditioning import cpdcond, norm_balance
from .decomp import cpd_gevd
from .errors import ConvergenceError, DecompositionError
from .rng import SeededRng
from .scaling import IslPreconditionWarning, distance, iterated_scaling
from .tensor import DenseTensor, Params, cpdgen, frobenius_norm
from .terracini import build_terracini, kernel_basis, right_singular_vectors

ERROR_HEADER = ("s", "backward", "forward_proxy", "orbit_forward", "kappa", "bound",
                "warned", "solver_failed")


def gen_random_factors(dims: Sequence[int], r: int, seed: int,
                       uniform: bool = False) -> list[np.ndarray]:
    """Factor matrices with i.i.d. standard normal (or uniform [0, 1)) entries."""
    rng = SeededRng(seed)
    draw = rng.uniform if uniform else rng.standard_normal
    return [draw((n, r)) for n in dims]


# --------------------------------------------------------------------------
# Sequences


def ill_conditioned_basis(seed: int, dims=(13, 11, 7)):
    """Random ``(A, B, C, x)`` for :func:`seq_ill_conditioned` (two terms)."""
    rng = SeededRng(seed)
    n1, n2, n3 = dims
    return (rng.standard_normal((n1, 2)), rng.standard_normal((n2, 2)),
            rng.standard_normal((n3, 2)), rng.standard_normal(n3))


def seq_ill_conditioned(s: float, basis) -> list[np.ndarray]:
    """Factors ``A, B, x 1^T + 2^-s C``: both third factors approach ``x``."""
    A, B, C, x = basis
    third = np.outer(x, np.ones(C.shape[1])) + 2.0 ** (-s) * C
    return [A.copy(), B.copy(), third]


def desilva_lim_vectors(seed: int, dims=(5, 4, 3)):
    """Random ``(a1, a2, a3, b1, b2, b3)`` for :func:`seq_desilva_lim`."""
    rng = SeededRng(seed)
    a = [rng.standard_normal(n) for n in dims]
    b = [rng.standard_normal(n) for n in dims]
    return (*a, *b)


def seq_desilva_lim(s: float, vectors) -> list[np.ndarray]:
    """Rank-2 factors ``t (a1 + b1/t) (x) (a2 + b2/t) (x) (a3 + b3/t) - t a1 (x) a2 (x) a3``.

    Here ``t = 2^(s/5)``.  As ``s`` grows these tensors converge to the
    rank-3 tensor returned by :func:`desilva_lim_limit`.
    """
    a1, a2, a3, b1, b2, b3 = vectors
    t = 2.0 ** (s / 5)
    first = (t * (a1 + b1 / t), a2 + b2 / t, a3 + b3 / t)
    second = (-t * a1, a2, a3)
    return [np.column_stack((f, g)) for f, g in zip(first, second)]


def desilva_lim_limit(vectors) -> DenseTensor:
    a1, a2, a3, b1, b2, b3 = vectors
    terms = [(b1, a2, a3), (a1, b2, a3), (a1, a2, b3)]
    vals = sum(np.kron(np.kron(x, y), z) for x, y, z in terms)
    return DenseTensor((a1.size, a2.size, a3.size), vals)


def paatero_basis(seed: int, dims=(5, 4, 3)):
    """Random ``(Ab, Bb, Cb)``, each ``n_k x 3``."""
    rng = SeededRng(seed)
    return tuple(rng.standard_normal((n, 3)) for n in dims)


def seq_paatero(s: float, basis) -> list[np.ndarray]:
    """Paatero's three-term sequence with ``e = 2^(-s/16)``."""
    Ab, Bb, Cb = basis
    e = 2.0 ** (-s / 16)
    A = np.column_stack((-Ab[:, 0] / e - Ab[:, 1] / e,
                         Ab[:, 0] / e + e * e * Ab[:, 2] / 2,
                         Ab[:, 1] / e))
    B = np.column_stack((-Bb[:, 0] / e,
                         Bb[:, 0] / e + e * e * Bb[:, 1] / 2,
                         Bb[:, 0] / e + e * e * Bb[:, 2] / 2))
    C = np.column_stack((-Cb[:, 0] / e,
                         Cb[:, 0] / e + e * e * Cb[:, 1] / 2,
                         Cb[:, 0] / e + e * e * Cb[:, 2] / 2))
    return [A, B, C]


# --------------------------------------------------------------------------
# Worst perturbation


def worst_direction(p: Params) -> np.ndarray:
    """Right singular vector of ``T_p`` for the ``N``-th singular value.

    The sign is fixed so that its first non-negligible entry is positive.
    """
    _, V = right_singular_vectors(build_terracini(p).matrix)
    w = V[:, p.shape.n_free - 1].copy()
    big = np.flatnonzero(np.abs(w) > 1e-12 * np.max(np.abs(w)))
    if w[big[0]] < 0:
        w = -w
    return w


def worst_perturbation(p: Params, eps: float) -> Params:
    """``p + eps * w`` along the worst direction (``p`` should be balanced)."""
    if eps == 0:
        return p
    return p + eps * worst_direction(p)


@dataclass(frozen=True)
class WorstDirectionCheck:
    kappa: float
    ratio: float
    rel_diff: float


def worst_direction_check(p, eps: float = 1e-8) -> WorstDirectionCheck:
    """Observed forward/backward ratio along the worst direction.

    Balances ``p``, perturbs it by ``eps`` along :func:`worst_direction`,
    rebalances, and compares the relative parameter change with the relative
    tensor change.
    """
    rep = cpdcond(p)
    pb = rep.params
    bad, _ = norm_balance(worst_perturbation(pb, eps))
    A = cpdgen(pb)
    fwd = np.linalg.norm(bad.data - pb.data) / pb.norm()
    bwd = frobenius_norm(A - cpdgen(bad)) / frobenius_norm(A)
    ratio = fwd / bwd
    return WorstDirectionCheck(rep.kappa_rel, ratio, abs(ratio - rep.kappa_rel) / rep.kappa_rel)


# --------------------------------------------------------------------------
# Error analysis


@dataclass(frozen=True)
class ErrorRow:
    s: float
    backward: float
    forward_proxy: float
    orbit_forward: float
    kappa: float
    bound: float
    warned: bool
    solver_failed: bool
    param_tensor_ratio: float = math.nan  # ||p_hat|| / ||A_hat||

    def csv_fields(self) -> list:
        return [getattr(self, name) for name in ERROR_HEADER]


def _failed_row(s) -> ErrorRow:
    nan = math.nan
    return ErrorRow(s, nan, nan, nan, nan, nan, False, True)


def _sign_aligned(p: Params, q: Params, perm: np.ndarray) -> np.ndarray:
    """Terms of ``q`` reordered by ``perm`` with the best sign pattern per term."""
    d = p.shape.order
    patterns = [np.array(s) for s in itertools.product((1.0, -1.0), repeat=d - 1)]
    out = []
    for i in range(p.shape.rank):
        a, c = p.term(i), q.term(perm[i])
        best, cost = None, math.inf
        for pat in patterns:
            sg = np.concatenate(([np.prod(pat)], pat))
            cand = [g * x for g, x in zip(sg, c)]
            err = sum(float(np.sum((x - y) ** 2)) for x, y in zip(a, cand))
            if err < cost:
                best, cost = cand, err
        out.extend(best)
    return np.concatenate(out)


def error_row(s, p: Params, p_hat: Params) -> ErrorRow:
    pb, _ = norm_balance(p)
    qb, _ = norm_balance(p_hat)
    A = cpdgen(pb)
    A_hat = cpdgen(qb)
    backward = frobenius_norm(A - A_hat) / frobenius_norm(A)
    dist = distance(pb, qb)
    aligned = _sign_aligned(pb, qb, dist.minimizer.perm)
    pnorm = pb.norm()
    proxy = float(np.linalg.norm(pb.data - aligned)) / pnorm
    # the sign-aligned point lies in the orbit too
    orbit = min(dist.value / pnorm, proxy)
    rep = cpdcond(qb)
    return ErrorRow(
        s=s, backward=backward, forward_proxy=proxy, orbit_forward=orbit,
        kappa=rep.kappa_rel, bound=rep.kappa_rel * backward,
        warned=rep.accuracy_warning, solver_failed=False,
        param_tensor_ratio=qb.norm() / frobenius_norm(A_hat),
    )


def _error_point(sequence, decomposer, s) -> ErrorRow:
    p = Params.from_factors(sequence(s))
    try:
        p_hat = decomposer(cpdgen(p), p.shape.rank)
    except (DecompositionError, np.linalg.LinAlgError):
        return _failed_row(s)
    return error_row(s, p, p_hat)


def run_error_analysis(sequence: Callable[[float], Sequence[np.ndarray]],
                       s_values: Iterable[float],
                       decomposer: Callable[[DenseTensor, int], Params] = cpd_gevd,
                       threads: int = 1) -> list[ErrorRow]:
    """One :class:`ErrorRow` per ``s``, in the order of ``s_values``.

    Points are independent; with ``threads > 1`` they are evaluated on a
    thread pool, which does not change any value.
    """
    s_values = list(s_values)
    point = partial(_error_point, sequence, decomposer)
    if threads <= 1 or len(s_values) < 2:
        return [point(s) for s in s_values]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(point, s_values))


def write_error_csv(rows: Sequence[ErrorRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ERROR_HEADER)
    for row in rows:
        w.writerow([fmt17(x) for x in row.csv_fields()])


def fmt17(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


# --------------------------------------------------------------------------
# Closed-form sweeps


def odeco_sweep(s_max: int = 15, seed: int = 0, n: int = 3) -> list[tuple[int, float]]:
    """``log10 kappa`` of ``10^-s u1 (x) u2 (x) u3 + v1 (x) v2 (x) v3``, orthonormal pairs."""
    rng = SeededRng(seed)
    pairs = [rng.orthonormal(n, 2) for _ in range(3)]
    out = []
    for s in range(s_max + 1):
        factors = [Q.copy() for Q in pairs]
        factors[0][:, 0] *= 10.0 ** (-s)
        out.append((s, math.log10(cpdcond(factors).kappa_rel)))
    return out


def rank1_sweep(d_values=range(3, 11), seed: int = 0) -> list[tuple[int, float, float]]:
    """Relative condition of rank-1 tensors; rows ``(d, dim, kappa)``.

    Mirrors the setup with unit vectors of length 2, 3, 4 scaled by 1, 2, 3
    and repeated ``d`` times.
    """
    rng = SeededRng(seed)
    vecs = [(n, scale, rng.orthonormal(n, 1)[:, 0]) for n, scale in ((2, 1.0), (3, 2.0), (4, 3.0))]
    rows = []
    for d in d_values:
        for n, scale, v in vecs:
            factors = [scale * v.reshape(-1, 1) for _ in range(d)]
            rows.append((d, n, cpdcond(factors).kappa_rel))
    return rows


# --------------------------------------------------------------------------
# Iterated scaling convergence


SEC92_FACTORS = (
    np.array([[5.1518e-01, 8.8821e-01], [4.9802e-01, 3.6941e-01], [5.0806e-01, 1.1117e-01]]),
    np.array([[1.9032e-01, 7.5082e-01], [5.4218e-01, 1.6653e-01], [6.6436e-01, 5.8845e-01]]),
    np.array([[7.2302e-01, 6.9447e-01], [4.9879e-01, 6.7487e-01]]),
)

SEC91_FACTORS = (
    np.array([[2.0, 0.0], [-1.0, 1.0], [0.0, 2.0]]),
    np.array([[-1.0, -2.0], [2.0, 0.0], [0.0, 1.0]]),
    np.array([[1.0, -2.0], [2.0, 1.0]]),
)


def random_kernel_direction(p: Params, seed: int) -> np.ndarray:
    """Unit vector in the span of the analytic kernel basis."""
    K = kernel_basis(p).matrix
    v = K @ SeededRng(seed).standard_normal(K.shape[1])
    return v / np.linalg.norm(v)


def isl_convergence(p: Params, direction: np.ndarray, q_values=range(1, 6)):
    """``||nabla^(k)||`` traces for ``||nabla|| = 10^-q``; rows ``(q, k, norm, converged)``."""
    rows = []
    for q in q_values:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IslPreconditionWarning)
            try:
                trace = iterated_scaling(p, 10.0 ** (-q) * direction).nabla_norms
                ok = True
            except ConvergenceError as exc:
                trace, ok = exc.trace, False
        rows.extend((q, k + 1, v, ok) for k, v in enumerate(trace))
    return rows
