"""JSON file format for POVMs.

Schema::

    {"dimension": d, "copies": N,
     "points": [{"weight": c, "amplitudes": [[re, im], ...]}, ...]}

Amplitudes are in the computational basis. Floats are written with
``repr`` precision, so a load/dump round trip is lossless.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from cloning_lab.estimator import Povm


class PovmSchemaError(ValueError):
    """A POVM file is malformed; the message names the offending field."""


def povm_to_dict(povm: Povm) -> dict:
    return {
        "dimension": int(povm.d),
        "copies": int(povm.n),
        "points": [
            {"weight": float(w), "amplitudes": [[float(a.real), float(a.imag)] for a in cand]}
            for w, cand in zip(povm.weights, povm.candidates)
        ],
    }


def dumps_povm(povm: Povm) -> str:
    return json.dumps(povm_to_dict(povm), indent=1) + "\n"


def povm_serialize(povm: Povm, path) -> None:
    Path(path).write_text(dumps_povm(povm), encoding="utf-8")


def _int_field(obj: dict, key: str, minimum: int) -> int:
    if key not in obj:
        raise PovmSchemaError(f"missing field '{key}'")
    val = obj[key]
    if not isinstance(val, int) or isinstance(val, bool) or val < minimum:
        raise PovmSchemaError(f"field '{key}' must be an integer >= {minimum}, got {val!r}")
    return val


def _number(val, where: str) -> float:
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise PovmSchemaError(f"{where} must be a number, got {val!r}")
    return float(val)


def povm_from_dict(obj) -> Povm:
    if not isinstance(obj, dict):
        raise PovmSchemaError("top level must be a JSON object")
    d = _int_field(obj, "dimension", 2)
    n = _int_field(obj, "copies", 1)
    points = obj.get("points")
    if not isinstance(points, list) or not points:
        raise PovmSchemaError("field 'points' must be a non-empty list")
    weights = np.empty(len(points))
    cands = np.empty((len(points), d), dtype=complex)
    for i, pt in enumerate(points):
        where = f"points[{i}]"
        if not isinstance(pt, dict) or "weight" not in pt or "amplitudes" not in pt:
            raise PovmSchemaError(f"{where} must be an object with 'weight' and 'amplitudes'")
        weights[i] = _number(pt["weight"], f"{where}.weight")
        amps = pt["amplitudes"]
        if not isinstance(amps, list) or len(amps) != d:
            raise PovmSchemaError(f"{where}.amplitudes must list {d} complex numbers")
        for k, a in enumerate(amps):
            if not isinstance(a, list) or len(a) != 2:
                raise PovmSchemaError(f"{where}.amplitudes[{k}] must be [re, im]")
            cands[i, k] = complex(_number(a[0], f"{where}.amplitudes[{k}][0]"), _number(a[1], f"{where}.amplitudes[{k}][1]"))
    return Povm(d=d, n=n, candidates=cands, weights=weights)


def loads_povm(text: str) -> Povm:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PovmSchemaError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return povm_from_dict(obj)


def povm_load(path) -> Povm:
    """Read a POVM file. Raises :class:`PovmSchemaError`; never returns a partial POVM."""
    return loads_povm(Path(path).read_text(encoding="utf-8"))
