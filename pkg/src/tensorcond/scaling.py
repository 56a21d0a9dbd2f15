"""The scaling/permutation group, the orbit distance, and Iterated Scaling.

Two vectorized factor matrices represent the same decomposition when one is
obtained from the other by permuting the terms and rescaling the factor
vectors of each term by scalars whose product is one.  An element of that
group is a :class:`GroupElement`.

The distance between ``p`` and ``q`` is the Euclidean distance from ``p`` to
the closest point of the group orbit of ``q``.  It separates orbits:
``distance(p, q) == 0`` exactly when ``p`` and ``q`` are equivalent.

Note that minimising over the orbits of *both* arguments does not give a
usable distance.  For ``p = (a1, a2, c)`` and ``q = (b1, b2, c)`` the
scalings ``diag(t, t, t**-2)`` applied to both drive ``||T p - T q||`` to zero
as ``t -> 0`` although ``a1 (x) a2 (x) c != b1 (x) b2 (x) c``: the two orbits
meet at infinity.  Only the one-sided version is implemented here.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConvergenceError, DegenerateInputError, ShapeError
from .rng import SeededRng
from .tensor import Params, check_nonzero_factors
from .terracini import EPS


class IslPreconditionWarning(UserWarning):
    """The perturbation is larger than the admissible radius ``1/(2 lambda)``."""


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Permutation of the terms plus per-term scalings.

    Applying the element maps term ``i`` of the result to term ``perm[i]``
    of the input, scaled by ``thetas[perm[i]]``: factor ``k >= 2`` is
    multiplied by ``thetas[perm[i], k - 2]`` and factor 1 by the inverse of
    their product.
    """

    perm: np.ndarray
    thetas: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=int).reshape(-1)
        thetas = np.asarray(self.thetas, dtype=float)
        if thetas.ndim != 2 or thetas.shape[0] != perm.size:
            raise ShapeError("thetas must be an r x (d-1) array")
        if sorted(perm.tolist()) != list(range(perm.size)):
            raise ShapeError(f"{perm.tolist()} is not a permutation")
        if np.any(thetas == 0):
            raise DegenerateInputError("scalings must be nonzero")
        perm.setflags(write=False)
        thetas.setflags(write=False)
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "thetas", thetas)

    @classmethod
    def identity(cls, rank: int, order: int) -> "GroupElement":
        return cls(np.arange(rank), np.ones((rank, order - 1)))

    @property
    def first_factor_scalings(self) -> np.ndarray:
        """Implied factor-1 scaling of each term, ``1 / prod_k theta_k``."""
        return 1.0 / np.prod(self.thetas, axis=1)

    def full_scalings(self) -> np.ndarray:
        """``r x d`` array whose rows multiply to one."""
        return np.column_stack((self.first_factor_scalings, self.thetas))

    def compose(self, other: "GroupElement") -> "GroupElement":
        """``self o other``: apply ``other`` first, then ``self``."""
        perm = other.perm[self.perm]
        thetas = np.empty_like(other.thetas)
        for i in range(perm.size):
            thetas[perm[i]] = self.thetas[self.perm[i]] * other.thetas[perm[i]]
        return GroupElement(perm, thetas)

    def inverse(self) -> "GroupElement":
        inv = np.argsort(self.perm)
        return GroupElement(inv, 1.0 / self.thetas[self.perm])


def apply_group(g: GroupElement, p: Params) -> Params:
    shape = p.shape
    if g.perm.size != shape.rank or g.thetas.shape[1] != shape.order - 1:
        raise ShapeError(f"group element does not match {shape}")
    scal = g.full_scalings()
    out = []
    for i in range(shape.rank):
        j = g.perm[i]
        out.extend(s * a for s, a in zip(scal[j], p.term(j)))
    return Params(shape, np.concatenate(out))


# --------------------------------------------------------------------------
# Orbit distance


def _pair_objective(a, c, theta) -> float:
    val = np.sum((a[0] - c[0] / np.prod(theta)) ** 2)
    for k in range(1, len(a)):
        val += np.sum((a[k] - theta[k - 1] * c[k]) ** 2)
    return float(val)


def _h(t, aa1, au, uu, aak, ac, cc) -> float:
    return aa1 - 2 * au / t + uu / t ** 2 + aak - 2 * t * ac + t * t * cc


def _best_scalar(aa1, au, uu, aak, ac, cc) -> float:
    # Minimise h(t) = ||a1 - u/t||^2 + ||ak - t ck||^2 over real t != 0.
    # Critical points solve cc t^4 - ac t^3 + au t - uu = 0.
    coef = (aa1, au, uu, aak, ac, cc)
    roots = np.roots([cc, -ac, 0.0, au, -uu])
    cands = [r.real for r in roots if abs(r.imag) <= 1e-8 * max(abs(r), 1e-300) and r.real != 0]
    if not cands:
        cands = [r.real for r in roots if r.real != 0]
    best, hbest = None, math.inf
    for t in cands:
        # Newton polish on the quartic; keep only if h does not grow
        for _ in range(2):
            q = ((cc * t - ac) * t * t + au) * t - uu
            dq = (4 * cc * t - 3 * ac) * t * t + au
            if dq == 0:
                break
            tn = t - q / dq
            if tn == 0 or _h(tn, *coef) > _h(t, *coef):
                break
            t = tn
        ht = _h(t, *coef)
        if ht < hbest:
            best, hbest = t, ht
    return best


def _local_scalar(t, aa1, au, uu, aak, ac, cc):
    """Newton on the quartic from ``t``; None unless it lands on a local minimum no worse than ``t``."""
    h0 = _h(t, aa1, au, uu, aak, ac, cc)
    t0 = t
    for _ in range(30):
        q = ((cc * t - ac) * t * t + au) * t - uu
        dq = (4 * cc * t - 3 * ac) * t * t + au
        if dq == 0:
            return None
        tn = t - q / dq
        if tn == 0 or not math.isfinite(tn):
            return None
        done = abs(tn - t) <= 4 * EPS * abs(t)
        t = tn
        if done:
            break
    else:
        return None
    curv = -4 * au / t ** 3 + 6 * uu / t ** 4 + 2 * cc
    if curv <= 0 or t * t0 < 0 or _h(t, aa1, au, uu, aak, ac, cc) > h0:
        return None
    return t


def _descend(a, c, theta, max_sweeps, step_tol):
    d = len(a)
    theta = np.array(theta, dtype=float)
    aa1 = float(a[0] @ a[0])
    c1a1 = float(a[0] @ c[0])
    c1c1 = float(c[0] @ c[0])
    ak_ck = [float(a[k] @ c[k]) for k in range(d)]
    ck_ck = [float(c[k] @ c[k]) for k in range(d)]
    ak_ak = [float(a[k] @ a[k]) for k in range(d)]
    for sweep in range(max_sweeps):
        biggest = 0.0
        for k in range(1, d):
            others = math.prod(theta[j] for j in range(d - 1) if j != k - 1)
            coef = (aa1, c1a1 / others, c1c1 / others ** 2, ak_ak[k], ak_ck[k], ck_ck[k])
            # global 1-D minimum on the first sweep, warm-started Newton after
            t = _local_scalar(theta[k - 1], *coef) if sweep else None
            if t is None:
                t = _best_scalar(*coef)
            step = abs(t - theta[k - 1]) / max(1.0, abs(theta[k - 1]))
            biggest = max(biggest, step)
            theta[k - 1] = t
        if biggest < step_tol:
            break
    return theta


def _initial_thetas(a, c) -> np.ndarray:
    d = len(a)
    theta = np.ones(d - 1)
    for k in range(1, d):
        cc = float(c[k] @ c[k])
        proj = float(c[k] @ a[k]) / cc
        na, nc = np.linalg.norm(a[k]), math.sqrt(cc)
        if abs(proj) > 1e-12 * na / nc:
            theta[k - 1] = proj
        elif na > 0:
            theta[k - 1] = math.copysign(na / nc, float(c[k] @ a[k]) or 1.0)
    return theta


def pair_distance(b, c, *, max_sweeps: int = 2000, step_tol: float = 1e-12,
                  restarts: int = 8, seed: int = 0) -> tuple[float, np.ndarray]:
    """Distance from the representative ``b`` to the scaling orbit of ``c``.

    Minimises ``||a^1 - c^1 / prod(theta)||^2 + sum_k ||a^k - theta_k c^k||^2``
    over nonzero ``theta_2..theta_d`` by exact coordinate minimisation, each
    one-dimensional problem being a quartic in ``theta_k``.  Starting points
    are the projections ``<c^k, a^k>/||c^k||^2``, the identity, and the best
    sign pattern in ``{-1, 1}^(d-1)``; when the best residual still exceeds
    ``0.5 ||b||`` a few extra random starts are tried.  The result is a local
    minimum, never worse than any of the starting points.

    Returns ``(value, thetas)`` with ``value`` the minimal Euclidean distance.
    """
    a = [np.asarray(x, dtype=float) for x in b]
    c = [np.asarray(x, dtype=float) for x in c]
    if len(a) != len(c) or any(x.shape != y.shape for x, y in zip(a, c)):
        raise ShapeError("representatives have different dims")
    if any(not np.any(x) for x in c):
        raise DegenerateInputError("cannot scale a zero factor vector")
    d = len(a)

    starts = [_initial_thetas(a, c), np.ones(d - 1)]
    signs = [np.array(s, dtype=float) for s in np.ndindex(*([2] * (d - 1)))]
    signs = [1.0 - 2.0 * s for s in signs]
    starts.append(min(signs, key=lambda s: _pair_objective(a, c, s)))

    best, fbest = None, math.inf
    for th in starts:
        # a start can beat its descended point by rounding in the quartic roots
        for cand in (np.asarray(th, dtype=float), _descend(a, c, th, max_sweeps, step_tol)):
            f = _pair_objective(a, c, cand)
            if f < fbest:
                best, fbest = cand, f

    bnorm = math.sqrt(sum(float(x @ x) for x in a))
    if math.sqrt(fbest) > 0.5 * bnorm and restarts > 0:
        rng = SeededRng(seed)
        base = np.abs(_initial_thetas(a, c))
        for _ in range(restarts):
            sign = np.where(rng.uniform(d - 1) < 0.5, -1.0, 1.0)
            th = base * np.exp(rng.standard_normal(d - 1)) * sign
            th = _descend(a, c, th, max_sweeps, step_tol)
            f = _pair_objective(a, c, th)
            if f < fbest:
                best, fbest = th, f
    return math.sqrt(max(fbest, 0.0)), best


@dataclass(frozen=True, eq=False)
class DistanceResult:
    value: float
    minimizer: GroupElement
    per_pair_costs: np.ndarray

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "permutation": self.minimizer.perm.tolist(),
            "thetas": self.minimizer.thetas.tolist(),
        }


def distance(p: Params, q: Params, *, step_tol: float = 1e-12) -> DistanceResult:
    """Distance from ``p`` to the group orbit of ``q``.

    The squared objective separates over the assigned term pairs, so it is
    minimised pairwise and the pairing is found with the Hungarian method.
    ``apply_group(result.minimizer, q)`` is the closest orbit point found.
    """
    if p.shape != q.shape:
        raise ShapeError(f"shapes differ: {p.shape} vs {q.shape}")
    r, d = p.shape.rank, p.shape.order
    costs = np.empty((r, r))
    thetas = np.empty((r, r, d - 1))
    pt, qt = p.terms(), q.terms()
    for i in range(r):
        for j in range(r):
            costs[i, j], thetas[i, j] = pair_distance(pt[i], qt[j], step_tol=step_tol)
    rows, cols = linear_sum_assignment(costs ** 2)
    perm = np.empty(r, dtype=int)
    perm[rows] = cols
    best = np.empty((r, d - 1))
    for i in range(r):
        best[perm[i]] = thetas[i, perm[i]]
    value = math.sqrt(float(np.sum(costs[np.arange(r), perm] ** 2)))
    return DistanceResult(value, GroupElement(perm, best), costs)


# --------------------------------------------------------------------------
# Iterated Scaling


@dataclass(frozen=True, eq=False)
class IslResult:
    p_dot: Params
    delta: np.ndarray
    gammas: np.ndarray  # r x (d-1), scalings of factors 2..d
    nabla_norms: list = field(default_factory=list)
    converged: bool = True
    lam: float = math.nan
    precondition_ok: bool = True

    @property
    def iterations(self) -> int:
        return max(len(self.nabla_norms) - 1, 0)

    def full_gammas(self) -> np.ndarray:
        """``r x d`` scalings including the implied factor-1 column."""
        return np.column_stack((1.0 / np.prod(self.gammas, axis=1), self.gammas))

    def to_dict(self) -> dict:
        return {
            "p_dot": self.p_dot.data.tolist(),
            "delta": self.delta.tolist(),
            "delta_norm": float(np.linalg.norm(self.delta)),
            "gammas": self.gammas.tolist(),
            "nabla_norms": [float(x) for x in self.nabla_norms],
            "iterations": self.iterations,
            "converged": bool(self.converged),
            "lambda": float(self.lam),
            "precondition_ok": bool(self.precondition_ok),
        }


def isl_lambda(p: Params) -> float:
    """Constant ``2^(d+3) (d-1)^(3/2) max_i chi_i^2 ||a_i^1||``.

    ``chi_i`` is the inverse of the smallest norm among factors 2..d of term i.
    """
    d = p.shape.order
    worst = 0.0
    for rep in p.terms():
        chi = 1.0 / min(np.linalg.norm(a) for a in rep[1:])
        worst = max(worst, chi ** 2 * np.linalg.norm(rep[0]))
    return 2.0 ** (d + 3) * (d - 1) ** 1.5 * worst


class _Kernel:
    """Per-term kernel basis of ``T_p`` with a closed-form pseudoinverse.

    For term ``i`` the Gram matrix of its ``d - 1`` basis vectors is
    ``diag(||a^2||^2, .., ||a^d||^2) + ||a^1||^2 11^T``; it is inverted with
    the Sherman-Morrison formula.
    """

    def __init__(self, p: Params):
        check_nonzero_factors(p)
        self.shape = p.shape
        self.terms = p.terms()
        self.sq = np.array([[float(a @ a) for a in rep] for rep in self.terms])
        self.off = p.shape.offsets

    def coords(self, x: np.ndarray) -> np.ndarray:
        """Least-squares coordinates ``K^+ x`` as an ``r x (d-1)`` array."""
        r, b, off = self.shape.rank, self.shape.block, self.off
        d = self.shape.order
        v = np.empty((r, d - 1))
        for i, rep in enumerate(self.terms):
            blk = x[i * b:(i + 1) * b]
            head = float(rep[0] @ blk[off[0]:off[1]])
            rhs = np.array([head - float(rep[k] @ blk[off[k]:off[k + 1]]) for k in range(1, d)])
            dinv = 1.0 / self.sq[i, 1:]
            c = self.sq[i, 0]
            y = dinv * rhs
            v[i] = y - c * dinv * y.sum() / (1.0 + c * dinv.sum())
        return v

    def expand(self, v: np.ndarray) -> np.ndarray:
        """``K v`` for coordinates shaped ``r x (d-1)``."""
        r, b, off = self.shape.rank, self.shape.block, self.off
        d = self.shape.order
        out = np.zeros(self.shape.n_params)
        for i, rep in enumerate(self.terms):
            base = i * b
            out[base + off[0]:base + off[1]] = v[i].sum() * rep[0]
            for k in range(1, d):
                out[base + off[k]:base + off[k + 1]] = -v[i, k - 1] * rep[k]
        return out

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.expand(self.coords(x))


def _rescaled(p: Params, gam: np.ndarray) -> np.ndarray:
    parts = []
    for i, rep in enumerate(p.terms()):
        parts.append(rep[0] / np.prod(gam[i]))
        parts.extend(g * a for g, a in zip(gam[i], rep[1:]))
    return np.concatenate(parts)


def iterated_scaling(p: Params, nabla, *, max_iter: int = 200,
                     tol: float = 10 * EPS) -> IslResult:
    """Rewrite ``p + nabla`` as ``p_dot + delta`` with ``p_dot`` equivalent to ``p``.

    ``nabla`` should lie in the kernel of Terracini's matrix.  Each step
    expresses the current kernel perturbation in the analytic kernel basis,
    absorbs it into the per-term scalings, rebuilds the representative, and
    splits the mismatch into a new kernel part and a remainder orthogonal to
    the kernel that is added to ``delta``.  The loop stops once the kernel
    part has 2-norm at most ``tol`` (absolute, default ``10 eps``).  A
    component of the input that is not in the kernel goes straight to
    ``delta``.

    When ``||nabla|| > 1/(2 lambda)`` (see :func:`isl_lambda`) convergence is
    not guaranteed; an :class:`IslPreconditionWarning` is issued and the
    iteration proceeds.  Raises :class:`ConvergenceError` after ``max_iter``
    steps.
    """
    nabla = np.asarray(nabla, dtype=float).reshape(-1)
    if nabla.size != p.shape.n_params:
        raise ShapeError(f"nabla has length {nabla.size}, expected {p.shape.n_params}")
    ker = _Kernel(p)
    lam = isl_lambda(p)
    nnorm = float(np.linalg.norm(nabla))
    ok = nnorm <= 0.5 / lam
    if not ok:
        warnings.warn(
            f"||nabla|| = {nnorm:.3g} exceeds 1/(2 lambda) = {0.5 / lam:.3g}; "
            "convergence is not guaranteed",
            IslPreconditionWarning, stacklevel=2,
        )

    r, d = p.shape.rank, p.shape.order
    gam = np.ones((r, d - 1))
    pk = p.data.copy()
    kern = ker.project(nabla)
    delta = nabla - kern
    nabla = kern
    trace = [float(np.linalg.norm(nabla))]
    while trace[-1] > tol:
        if len(trace) > max_iter:
            raise ConvergenceError(
                f"iterated scaling did not converge in {max_iter} iterations", trace
            )
        v = ker.coords(nabla)
        gam = gam - v
        if np.any(gam == 0):
            raise ConvergenceError("a scaling collapsed to zero", trace)
        zk = pk + ker.expand(v)
        pk = _rescaled(p, gam)
        step = zk - pk
        kern = ker.project(step)
        delta = delta + (step - kern)
        nabla = kern
        trace.append(float(np.linalg.norm(nabla)))
    return IslResult(Params(p.shape, pk), delta, gam, trace, True, lam, ok)


def isl_rescale_diagonal(p: Params, gammas) -> np.ndarray:
    """Diagonal matrix ``D`` with ``T_{p_dot} = T_p D``.

    ``gammas`` holds the ``r x (d-1)`` scalings of factors 2..d (as in
    :class:`IslResult`); block ``i`` of ``D`` is
    ``diag(gamma_{1,i}^-1 I, ..., gamma_{d,i}^-1 I)``.
    """
    gam = np.asarray(gammas, dtype=float)
    if gam.shape != (p.shape.rank, p.shape.order - 1):
        raise ShapeError("gammas must be r x (d-1)")
    if np.any(gam == 0):
        raise DegenerateInputError("scalings must be nonzero")
    full = np.column_stack((1.0 / np.prod(gam, axis=1), gam))
    diag = np.concatenate([
        np.repeat(1.0 / full[i], p.shape.dims) for i in range(p.shape.rank)
    ])
    return np.diag(diag)
