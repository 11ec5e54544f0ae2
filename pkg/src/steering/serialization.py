"""JSON schema for steering objects.

Every matrix is a row-major list of rows, each entry an `[re, im]` pair. Python's
float repr round-trips exactly, so load(dump(obj)) is bit-identical.

    {"type": "steering-functional", "n": 4, "m": 5, "d": 5,
     "entries": [[<matrix for x=0,a=0>, ...], ...]}
"""

from typing import Any

import numpy as np

from steering.errors import ValidationError
from steering.linalg import HermitianMatrix
from steering.model import (
    Assemblage,
    DichotomicFunctional,
    DichotomicObservable,
    Povm,
    SteeringFunctional,
)


def matrix_to_json(matrix: np.ndarray) -> list:
    matrix = np.asarray(matrix, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in matrix]


def matrix_from_json(rows: list) -> np.ndarray:
    array = np.array(rows, dtype=float)
    if array.ndim != 3 or array.shape[-1] != 2:
        raise ValidationError("json-matrix", f"expected rows of [re, im], got {array.shape}")
    return array[..., 0] + 1j * array[..., 1]


def stack_to_json(stack: np.ndarray) -> list:
    if stack.ndim == 2:
        return matrix_to_json(stack)
    return [stack_to_json(item) for item in stack]


def stack_from_json(data: list, depth: int) -> np.ndarray:
    if depth == 0:
        return matrix_from_json(data)
    return np.stack([stack_from_json(item, depth - 1) for item in data])


def to_json(obj) -> dict[str, Any]:
    if isinstance(obj, SteeringFunctional):
        n, m, d = obj.F.shape[:3]
        return {
            "type": "steering-functional",
            "n": n,
            "m": m,
            "d": d,
            "entries": stack_to_json(obj.F),
        }
    if isinstance(obj, Assemblage):
        n, m, d = obj.sigma.shape[:3]
        return {
            "type": "assemblage",
            "n": n,
            "m": m,
            "d": d,
            "complete": obj.complete,
            "entries": stack_to_json(obj.sigma),
        }
    if isinstance(obj, DichotomicFunctional):
        n, d = obj.F.shape[:2]
        return {"type": "dichotomic-functional", "n": n, "d": d, "entries": stack_to_json(obj.F)}
    if isinstance(obj, Povm):
        n, m, d = obj.effects.shape[:3]
        return {"type": "povm", "n": n, "m": m, "d": d, "entries": stack_to_json(obj.effects)}
    if isinstance(obj, DichotomicObservable):
        n, d = obj.E.shape[:2]
        return {"type": "dichotomic-observable", "n": n, "d": d, "entries": stack_to_json(obj.E)}
    if isinstance(obj, HermitianMatrix):
        return {"type": "hermitian-matrix", "d": obj.dim, "entries": matrix_to_json(obj.data)}
    raise TypeError(f"Cannot serialize object of type {type(obj).__name__}")


def _check_header(data: dict, entries: np.ndarray, keys: tuple[str, ...]):
    for axis, key in enumerate(keys):
        if data[key] != entries.shape[axis]:
            raise ValidationError(
                "json-header", f"header {key}={data[key]} but entries have {entries.shape[axis]}"
            )


def from_json(data: dict[str, Any]):
    kind = data.get("type")
    if kind == "steering-functional":
        entries = stack_from_json(data["entries"], 2)
        _check_header(data, entries, ("n", "m", "d"))
        return SteeringFunctional(entries)
    if kind == "assemblage":
        entries = stack_from_json(data["entries"], 2)
        _check_header(data, entries, ("n", "m", "d"))
        return Assemblage(entries, complete=bool(data.get("complete", True)))
    if kind == "dichotomic-functional":
        entries = stack_from_json(data["entries"], 1)
        _check_header(data, entries, ("n", "d"))
        return DichotomicFunctional(entries)
    if kind == "povm":
        entries = stack_from_json(data["entries"], 2)
        _check_header(data, entries, ("n", "m", "d"))
        return Povm(entries)
    if kind == "dichotomic-observable":
        entries = stack_from_json(data["entries"], 1)
        _check_header(data, entries, ("n", "d"))
        return DichotomicObservable(entries)
    if kind == "hermitian-matrix":
        return HermitianMatrix(matrix_from_json(data["entries"]))
    raise ValidationError("json-type", f"unknown object type '{kind}'")
