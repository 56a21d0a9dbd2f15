"""Command-line entry point ``tensorcond``.

Exit codes: 0 success, 1 usage or I/O error, 2 accuracy warning, 3 rank not
subgeneric, 4 solver failure.  Payloads go to stdout (or ``--out``);
diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import os
import sys
import warnings
from functools import partial
from pathlib import Path

import numpy as np

from . import lab
from .conditioning import cpdcond
from .decomp import cpd_gevd, kruskal_check
from .errors import ConvergenceError, DecompositionError, FormatError
from .io import dumps, params_to_obj, read_params, read_tensor
from .scaling import IslPreconditionWarning, distance, iterated_scaling
from .tensor import Params
from .terracini import build_terracini, kernel_basis

EXIT_OK, EXIT_USAGE, EXIT_WARN, EXIT_NOT_SUBGENERIC, EXIT_SOLVER = 0, 1, 2, 3, 4

EXPERIMENTS = ("isl-convergence", "worst-direction", "rank1-sweep", "odeco-sweep",
               "ill-conditioned", "desilva-lim", "paatero")

# default s ranges per experiment
S_RANGES = {
    "isl-convergence": (1, 5),
    "worst-direction": (8, 8),
    "rank1-sweep": (3, 10),
    "odeco-sweep": (0, 15),
    "ill-conditioned": (1, 45),
    "desilva-lim": (5, 100),
    "paatero": (20, 100),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive(text: str) -> float:
    val = float(text)
    if not val > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return val


def _dims(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dims {text!r}; use e.g. 3,3,2") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _matrix_csv(M: np.ndarray) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in M:
        w.writerow([lab.fmt17(x) for x in row])
    return buf.getvalue()


def _rows_csv(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([lab.fmt17(x) for x in row])
    return buf.getvalue()


def thread_cap(requested: int | None) -> int:
    """``--threads`` value, capped by ``TERRACINI_THREADS`` when set."""
    env = os.environ.get("TERRACINI_THREADS")
    cap = int(env) if env else None
    n = requested if requested is not None else (cap or 1)
    if cap is not None:
        n = min(n, cap)
    return max(1, n)


# --------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    facs = lab.gen_random_factors(args.dims, args.rank, args.seed, uniform=args.uniform)
    _emit(dumps(params_to_obj(Params.from_factors(facs))) + "\n", args.out)
    return EXIT_OK


def cmd_cond(args) -> int:
    p = read_params(args.decomposition)
    rep = cpdcond(p, balance=not args.unbalanced)
    _emit(dumps(rep.to_dict()) + "\n", args.out)
    if not rep.subgeneric:
        print("error: the number of terms is not subgeneric", file=sys.stderr)
        return EXIT_NOT_SUBGENERIC
    if rep.accuracy_warning:
        print("warning: sigma_N is within 100 eps of sigma_1; kappa may be inaccurate",
              file=sys.stderr)
        return EXIT_WARN
    return EXIT_OK


def cmd_terracini(args) -> int:
    _emit(_matrix_csv(build_terracini(read_params(args.decomposition)).matrix), args.out)
    return EXIT_OK


def cmd_kernel(args) -> int:
    _emit(_matrix_csv(kernel_basis(read_params(args.decomposition)).matrix), args.out)
    return EXIT_OK


def cmd_distance(args) -> int:
    p, q = read_params(args.first), read_params(args.second)
    res = distance(p, q, step_tol=args.distance_tol)
    _emit(dumps(res.to_dict()) + "\n", args.out)
    return EXIT_OK


def _kernel_direction(p: Params, spec: str) -> np.ndarray:
    K = kernel_basis(p).matrix
    if spec.startswith("random:"):
        return lab.random_kernel_direction(p, int(spec.split(":", 1)[1]))
    idx = int(spec.split(":", 1)[1] if spec.startswith("index:") else spec)
    if not 0 <= idx < K.shape[1]:
        raise UsageError(f"kernel column {idx} out of range 0..{K.shape[1] - 1}")
    return K[:, idx] / np.linalg.norm(K[:, idx])


def cmd_isl(args) -> int:
    p = read_params(args.decomposition)
    nabla = args.nabla_norm * _kernel_direction(p, args.kernel_dir)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IslPreconditionWarning)
        try:
            res = iterated_scaling(p, nabla, max_iter=args.max_iter)
        except ConvergenceError as exc:
            print(f"error: {exc}", file=sys.stderr)
            if args.trace_csv:
                _write_trace(args.trace_csv, exc.trace)
            return EXIT_SOLVER
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.trace_csv:
        _write_trace(args.trace_csv, res.nabla_norms)
    _emit(dumps(res.to_dict()) + "\n", args.out)
    return EXIT_OK


def _write_trace(path, trace) -> None:
    Path(path).write_text(_rows_csv(("k", "nabla_norm"), [(k + 1, v) for k, v in enumerate(trace)]))


def cmd_gevd(args) -> int:
    t = read_tensor(args.tensor)
    try:
        p = cpd_gevd(t, args.rank, seed=args.seed)
    except DecompositionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _emit(dumps(params_to_obj(p)) + "\n", args.out)
    return EXIT_OK


def cmd_kruskal(args) -> int:
    info = kruskal_check(read_params(args.decomposition), tol=args.kruskal_tol)
    _emit(dumps({"k_ranks": list(info.k_ranks), "rank": info.rank, "bound": info.bound,
                 "satisfied": info.satisfied}) + "\n", args.out)
    return EXIT_OK


def run_experiment(kind: str, seed: int, s_min: int | None = None, s_max: int | None = None,
                   threads: int = 1) -> str:
    """CSV text of one experiment; the CLI writes it verbatim."""
    lo, hi = S_RANGES[kind]
    lo = lo if s_min is None else s_min
    hi = hi if s_max is None else s_max
    srange = range(lo, hi + 1)
    if kind == "ill-conditioned":
        seq = partial(lab.seq_ill_conditioned, basis=lab.ill_conditioned_basis(seed))
    elif kind == "desilva-lim":
        seq = partial(lab.seq_desilva_lim, vectors=lab.desilva_lim_vectors(seed))
    elif kind == "paatero":
        seq = partial(lab.seq_paatero, basis=lab.paatero_basis(seed))
    else:
        seq = None
    if seq is not None:
        rows = lab.run_error_analysis(seq, srange, threads=threads)
        return _rows_csv(lab.ERROR_HEADER, [r.csv_fields() for r in rows])
    if kind == "odeco-sweep":
        if hi > 15 or lo < 0:
            raise UsageError("odeco-sweep needs 0 <= s <= 15")
        rows = [r for r in lab.odeco_sweep(hi, seed) if r[0] >= lo]
        return _rows_csv(("s", "log10_kappa"), rows)
    if kind == "rank1-sweep":
        rows = lab.rank1_sweep(srange, seed)
        return _rows_csv(("d", "n", "kappa", "kappa_inv_sq_minus_d"),
                         [(d, n, k, k ** -2 - d) for d, n, k in rows])
    if kind == "isl-convergence":
        p = Params.from_factors(lab.SEC91_FACTORS)
        rows = lab.isl_convergence(p, lab.random_kernel_direction(p, seed), srange)
        return _rows_csv(("q", "k", "nabla_norm", "converged"), rows)
    if kind == "worst-direction":
        out = []
        for s in srange:
            chk = lab.worst_direction_check(lab.SEC92_FACTORS, 10.0 ** (-s))
            out.append((s, chk.kappa, chk.ratio, chk.rel_diff))
        return _rows_csv(("s", "kappa", "ratio", "rel_diff"), out)
    raise UsageError(f"unknown experiment {kind}")


def cmd_experiment(args) -> int:
    text = run_experiment(args.kind, args.seed, args.s_min, args.s_max, thread_cap(args.threads))
    _emit(text, args.out)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tensorcond", description="Condition numbers of tensor rank decompositions.")
    ap.add_argument("-v", "--verbose", action="store_true", help="print tracebacks on errors")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(func=func)
        sp.add_argument("--out", help="write the payload here instead of stdout")
        return sp

    sp = add("gen", cmd_gen, "random decomposition")
    sp.add_argument("--dims", type=_dims, required=True)
    sp.add_argument("--rank", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--uniform", action="store_true", help="uniform [0,1) entries instead of normal")

    sp = add("cond", cmd_cond, "condition report of a decomposition")
    sp.add_argument("decomposition")
    sp.add_argument("--unbalanced", action="store_true",
                    help="evaluate at the given representative, without norm balancing")

    sp = add("terracini", cmd_terracini, "Terracini's matrix as CSV")
    sp.add_argument("decomposition")

    sp = add("kernel", cmd_kernel, "analytic kernel basis as CSV")
    sp.add_argument("decomposition")

    sp = add("distance", cmd_distance, "orbit distance between two decompositions")
    sp.add_argument("first")
    sp.add_argument("second")
    sp.add_argument("--distance-tol", type=_positive, default=1e-12)

    sp = add("isl", cmd_isl, "iterated scaling along a kernel direction")
    sp.add_argument("decomposition")
    sp.add_argument("--nabla-norm", type=_positive, required=True)
    sp.add_argument("--kernel-dir", default="0", help="column index J, index:J, or random:SEED")
    sp.add_argument("--max-iter", type=int, default=200)
    sp.add_argument("--trace-csv")

    sp = add("gevd", cmd_gevd, "direct order-3 decomposition of a tensor")
    sp.add_argument("tensor")
    sp.add_argument("--rank", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0, help="seed of the retry slice mix")

    sp = add("kruskal", cmd_kruskal, "Kruskal identifiability check")
    sp.add_argument("decomposition")
    sp.add_argument("--kruskal-tol", type=_positive, default=1e-10)

    sp = add("experiment", cmd_experiment, "seeded experiment, CSV output")
    sp.add_argument("kind", choices=EXPERIMENTS)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--s-min", type=int)
    sp.add_argument("--s-max", type=int)
    sp.add_argument("--threads", type=int)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, FormatError, OSError, ValueError, json.JSONDecodeError) as exc:
        if args.verbose:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
