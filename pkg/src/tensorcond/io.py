"""JSON file formats for decompositions and dense tensors.

Decomposition::

    {"dims": [n1, ..., nd], "rank": r, "factors": [M1, ..., Md]}

where ``Mk`` lists the ``r`` columns of the ``n_k x r`` factor matrix, each a
list of ``n_k`` numbers.  Dense tensor::

    {"dims": [n1, ..., nd], "values": [...]}

with values in Kronecker order.  Floats are written with Python's shortest
round-trip ``repr``, so reading back gives bit-identical doubles.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import FormatError
from .tensor import DenseTensor, Params, Shape


def _loads(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(
            f"{source}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None


def _require(obj, keys, source):
    if not isinstance(obj, dict):
        raise FormatError(f"{source}: expected a JSON object")
    missing = [k for k in keys if k not in obj]
    if missing:
        raise FormatError(f"{source}: missing key(s) {', '.join(missing)}")


def _floats(seq, source, what) -> np.ndarray:
    try:
        arr = np.array(seq, dtype=float)
    except (TypeError, ValueError):
        raise FormatError(f"{source}: {what} must be numeric") from None
    return arr


def params_to_obj(p: Params) -> dict:
    return {
        "dims": list(p.shape.dims),
        "rank": p.shape.rank,
        "factors": [F.T.tolist() for F in p.factors()],
    }


def params_from_obj(obj, source: str = "<input>") -> Params:
    _require(obj, ("dims", "rank", "factors"), source)
    dims, r, facs = obj["dims"], obj["rank"], obj["factors"]
    if not isinstance(facs, list) or len(facs) != len(dims):
        raise FormatError(f"{source}: need one factor matrix per dimension")
    mats = []
    for k, (n, cols) in enumerate(zip(dims, facs)):
        arr = _floats(cols, source, f"factor {k + 1}")
        if arr.shape != (r, n):
            raise FormatError(
                f"{source}: factor {k + 1} should be {r} columns of length {n}, got shape {arr.shape}"
            )
        mats.append(arr.T)
    p = Params.from_factors(mats)
    if p.shape != Shape(tuple(dims), r):
        raise FormatError(f"{source}: inconsistent dims/rank")
    return p


def tensor_to_obj(t: DenseTensor) -> dict:
    return {"dims": list(t.dims), "values": t.values.tolist()}


def tensor_from_obj(obj, source: str = "<input>") -> DenseTensor:
    _require(obj, ("dims", "values"), source)
    vals = _floats(obj["values"], source, "values")
    if vals.ndim != 1 or vals.size != math.prod(obj["dims"]):
        raise FormatError(f"{source}: values do not match dims {obj['dims']}")
    return DenseTensor(tuple(obj["dims"]), vals)


def dumps(obj) -> str:
    return json.dumps(obj)


def read_params(path) -> Params:
    path = Path(path)
    return params_from_obj(_loads(path.read_text(), str(path)), str(path))


def read_tensor(path) -> DenseTensor:
    path = Path(path)
    return tensor_from_obj(_loads(path.read_text(), str(path)), str(path))


def read_json(path):
    path = Path(path)
    return _loads(path.read_text(), str(path))


def write_params(p: Params, path) -> None:
    Path(path).write_text(dumps(params_to_obj(p)) + "\n")


def write_tensor(t: DenseTensor, path) -> None:
    Path(path).write_text(dumps(tensor_to_obj(t)) + "\n")
