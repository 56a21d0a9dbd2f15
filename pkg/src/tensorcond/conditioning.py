"""Norm-balanced condition number of the tensor rank decomposition.

The relative condition number of a decomposition ``p`` of a tensor ``A`` is

    kappa = (1 / sigma_N(T_p)) * ||A|| / ||p||,

evaluated at the norm-balanced representative, where ``sigma_N`` is the
``N = r (Sigma + 1)``-th largest singular value of Terracini's matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, ShapeError
from .tensor import Params, cpdgen, frobenius_norm
from .terracini import EPS, build_terracini, singular_values

WARN_FACTOR = 100.0


@dataclass(frozen=True, eq=False)
class ConditionReport:
    sigma: np.ndarray
    sigma_N: float
    kappa_abs: float
    kappa_rel: float
    tensor_norm: float
    param_norm: float
    accuracy_warning: bool
    subgeneric: bool
    balanced: bool = True
    params: Params | None = field(default=None, repr=False)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.kappa_rel)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "params"}
        out["sigma"] = [float(s) for s in self.sigma]
        for key in ("sigma_N", "kappa_abs", "kappa_rel", "tensor_norm", "param_norm"):
            out[key] = float(out[key])
        for key in ("accuracy_warning", "subgeneric", "balanced"):
            out[key] = bool(out[key])
        for key in ("sigma_N", "kappa_abs", "kappa_rel"):
            if not math.isfinite(out[key]):
                out[key] = None
        out["finite"] = self.finite
        return out


def norm_balance(p: Params) -> tuple[Params, np.ndarray]:
    """Rescale every term so that its d factor vectors share one norm.

    Term ``i`` is mapped to ``(gamma_i a^1/||a^1||, ..., gamma_i a^d/||a^d||)``
    with ``gamma_i = prod_k ||a_i^k||^(1/d)``.  Directions and signs are
    kept, so the rank-1 tensors are unchanged.

    Returns the balanced parameters and the vector of ``gamma_i``.
    """
    d = p.shape.order
    out = []
    gammas = np.empty(p.shape.rank)
    for i, rep in enumerate(p.terms()):
        norms = np.array([np.linalg.norm(a) for a in rep])
        if np.any(norms == 0):
            raise DegenerateInputError(f"term {i + 1} has a zero factor vector")
        gamma = float(np.prod(norms ** (1.0 / d)))
        gammas[i] = gamma
        out.extend(gamma * (a / n) for a, n in zip(rep, norms))
    return Params(p.shape, np.concatenate(out)), gammas


def balanced_param_norm(gammas: np.ndarray, d: int) -> float:
    return math.sqrt(d) * float(np.linalg.norm(gammas))


def cpdcond(p, *, balance: bool = True) -> ConditionReport:
    """Norm-balanced absolute and relative condition numbers of ``p``.

    ``p`` is a :class:`Params` or a sequence of factor matrices.  When
    ``r (Sigma + 1) > Pi`` the rank is not subgeneric and the report has
    infinite condition numbers with ``subgeneric=False``.  With
    ``balance=False`` the condition number is evaluated at the given
    representative instead.
    """
    if not isinstance(p, Params):
        p = Params.from_factors(p)
    shape = p.shape
    if balance:
        q, gammas = norm_balance(p)
        param_norm = balanced_param_norm(gammas, shape.order)
    else:
        q = p
        param_norm = p.norm()
    tensor_norm = frobenius_norm(cpdgen(q))

    if not shape.is_subgeneric():
        return ConditionReport(
            sigma=np.zeros(0), sigma_N=0.0, kappa_abs=math.inf, kappa_rel=math.inf,
            tensor_norm=tensor_norm, param_norm=param_norm, accuracy_warning=False,
            subgeneric=False, balanced=balance, params=q,
        )

    s = singular_values(build_terracini(q).matrix)
    sigma_N = float(s[shape.n_free - 1])
    kappa_abs = 1.0 / sigma_N if sigma_N > 0 else math.inf
    kappa_rel = kappa_abs * tensor_norm / param_norm if sigma_N > 0 else math.inf
    warn = bool(sigma_N <= WARN_FACTOR * EPS * s[0])
    return ConditionReport(
        sigma=s, sigma_N=sigma_N, kappa_abs=kappa_abs, kappa_rel=kappa_rel,
        tensor_norm=tensor_norm, param_norm=param_norm, accuracy_warning=warn,
        subgeneric=True, balanced=balance, params=q,
    )


def rank1_condition(d: int, alpha: float) -> tuple[float, float]:
    """Closed form for ``alpha * a^1 (x) ... (x) a^d`` with unit ``a^k``."""
    if d < 2:
        raise ShapeError("order must be at least 2")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return alpha ** (1.0 / d - 1.0), 1.0 / math.sqrt(d)


def rank1_terracini_singvals(shape, alpha: float) -> np.ndarray:
    """Singular values of Terracini's matrix at a balanced rank-1 point.

    They are ``sqrt(d) c``, then ``c`` repeated ``Sigma`` times, then ``d - 1``
    zeros, where ``c = alpha^(1 - 1/d)``.  Returned in descending order.
    """
    if shape.rank != 1:
        raise ShapeError("closed form holds for rank 1 only")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    d = shape.order
    c = alpha ** (1.0 - 1.0 / d)
    return np.concatenate(([math.sqrt(d) * c], np.full(shape.sigma, c), np.zeros(d - 1)))


def weak3_condition(alphas: Sequence[float], d: int) -> tuple[float, float]:
    """Closed form for weak 3-orthogonal decompositions.

    ``alphas`` are the norms of the rank-1 terms in non-increasing order.
    """
    a = np.asarray(alphas, dtype=float)
    if d < 3:
        raise ShapeError("weak 3-orthogonality needs order d >= 3")
    if a.size == 0 or np.any(a <= 0):
        raise ValueError("alphas must be positive")
    if np.any(np.diff(a) > 0):
        raise ValueError("alphas must be sorted in non-increasing order")
    kappa_abs = a[-1] ** (1.0 / d - 1.0)
    kappa_rel = kappa_abs * math.sqrt(np.sum(a ** 2)) / math.sqrt(np.sum(d * a ** (2.0 / d)))
    return float(kappa_abs), float(kappa_rel)


def is_weak3_orthogonal(p: Params, tol: float = 1e-12) -> bool:
    """True iff every pair of terms is orthogonal in at least three factors."""
    d = p.shape.order
    if d < 3:
        raise ShapeError("weak 3-orthogonality needs order d >= 3")
    terms = p.terms()
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            hits = 0
            for vi, vj in zip(terms[i], terms[j]):
                if abs(vi @ vj) <= tol * np.linalg.norm(vi) * np.linalg.norm(vj):
                    hits += 1
            if hits < 3:
                return False
    return True
