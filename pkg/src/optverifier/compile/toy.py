"""Binding parameterized models to data: small synthetic instances or external files.

Toy value rules (seeded, ``numpy.random.default_rng``):

* every symbolic dimension ``D`` becomes ``overrides[D]`` or ``min(value of D, 10)``;
* a parameter with a ``toy_range`` hint draws integers uniformly from that range;
* a parameter whose name contains ``capacity`` gets ``ceil(2 * total demand / entries)``
  in every entry, where total demand sums the generated demand parameters;
* everything else draws integers uniformly from [1, 100].
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..errors import DataBindingError
from ..model_ir import OptimizationModel
from .grounding import bind_model

TOY_DIM_CAP = 10
DEFAULT_RANGE = (1, 100)


def _symbolic_dims(model: OptimizationModel) -> list[str]:
    dims: list[str] = []
    for item in (*model.parameters, *model.variables):
        for d in item.shape:
            if isinstance(d, str) and d not in dims:
                dims.append(d)
    return dims


def _is_demand(symbol: str) -> bool:
    s = symbol.lower()
    return "demand" in s and "min" not in s and "max" not in s


def _is_capacity(symbol: str) -> bool:
    return "capacity" in symbol.lower()


def _nest(flat: list, shape: tuple[int, ...]):
    if not shape:
        return flat[0]
    if len(shape) == 1:
        return tuple(flat)
    step = math.prod(shape[1:])
    return tuple(_nest(flat[i * step:(i + 1) * step], shape[1:]) for i in range(shape[0]))


def instantiate_toy(
    model: OptimizationModel, seed: int = 0, dim_overrides: Mapping[str, int] | None = None
) -> tuple[OptimizationModel, dict[str, Any]]:
    """Return a concrete small copy of ``model`` and the bindings used to build it."""
    externals = [p for p in model.parameters if p.is_external]
    dims = _symbolic_dims(model)
    if not externals and not dims:
        raise DataBindingError("model has no external or symbolic-shaped parameters", "NO_EXTERNAL_PARAMETERS")
    overrides = dict(dim_overrides or {})
    bindings: dict[str, Any] = {}
    for d in dims:
        if d in overrides:
            size = int(overrides[d])
        else:
            p = model.parameter(d)
            original = p.value if p is not None and not p.is_external else TOY_DIM_CAP
            size = min(int(original), TOY_DIM_CAP)
        if size < 0:
            raise DataBindingError(f"dimension {d} must be non-negative", "SHAPE_MISMATCH")
        bindings[d] = size

    def shape_of(p) -> tuple[int, ...]:
        return tuple(bindings[d] if isinstance(d, str) else int(d) for d in p.shape)

    rng = np.random.default_rng(seed)
    total_demand = 0
    deferred = []
    for p in externals:
        if _is_capacity(p.symbol) and p.value.toy_range is None:
            deferred.append(p)
            continue
        shape = shape_of(p)
        lo, hi = p.value.toy_range or DEFAULT_RANGE
        flat = rng.integers(int(lo), int(hi) + 1, size=max(1, math.prod(shape))).tolist()
        bindings[p.symbol] = _nest(flat, shape)
        if _is_demand(p.symbol):
            total_demand += sum(flat)
    for p in deferred:
        shape = shape_of(p)
        entries = max(1, math.prod(shape))
        if total_demand:
            flat = [math.ceil(2 * total_demand / entries)] * entries
        else:
            flat = rng.integers(DEFAULT_RANGE[0], DEFAULT_RANGE[1] + 1, size=entries).tolist()
        bindings[p.symbol] = _nest(flat, shape)
    return bind_model(model, bindings), bindings


# ------------------------------------------------------------ external data


def _number(text: str, where: str):
    try:
        value = float(text)
    except (TypeError, ValueError) as exc:
        raise DataBindingError(f"non-numeric value {text!r} in {where}", "SHAPE_MISMATCH") from exc
    return int(value) if value.is_integer() else value


def _read_table(path: Path) -> dict[str, Any]:
    if path.suffix.lower() == ".json":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise DataBindingError(f"{path} must hold a JSON object keyed by parameter name", "SHAPE_MISMATCH")
        return doc
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        columns: dict[str, list] = {name.strip(): [] for name in (reader.fieldnames or [])}
        for lineno, row in enumerate(reader, 2):
            for name, value in row.items():
                if name is None:
                    raise DataBindingError(f"{path}:{lineno} has more cells than header columns", "SHAPE_MISMATCH")
                columns[name.strip()].append(_number(value, f"{path}:{lineno}"))
    return columns


def _shape_of(value) -> tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        inner = {_shape_of(v) for v in value}
        if len(inner) > 1:
            raise DataBindingError("ragged nested list", "SHAPE_MISMATCH")
        return (len(value),) + (inner.pop() if inner else ())
    return ()


def load_external_parameters(
    model: OptimizationModel, data_path, bindings: Mapping[str, Any] | None = None
) -> dict[str, Any]:
    """Bind external parameters whose source file name matches ``data_path``.

    CSV files supply one column per parameter (column = reference key or
    parameter symbol); JSON files map keys to nested lists.  Symbolic
    dimensions are inferred from the data and must agree across parameters
    (including any already present in ``bindings``).
    """
    path = Path(data_path)
    if not path.is_file():
        raise DataBindingError(f"data file {path} does not exist", "DATA_NOT_FOUND")
    targets = [p for p in model.parameters if p.is_external and os.path.basename(p.value.source) == path.name]
    if not targets:
        if not any(p.is_external for p in model.parameters):
            raise DataBindingError("model has no external parameters", "NO_EXTERNAL_PARAMETERS")
        raise DataBindingError(f"no external parameter refers to {path.name}", "MISSING_COLUMN")
    table = _read_table(path)
    out: dict[str, Any] = dict(bindings or {})
    for p in targets:
        key = p.value.key or p.symbol
        if key not in table:
            raise DataBindingError(f"{path.name} has no column {key!r} for {p.symbol}", "MISSING_COLUMN")
        value = table[key]
        shape = _shape_of(value)
        if len(shape) != len(p.shape):
            raise DataBindingError(
                f"{p.symbol} expects {len(p.shape)} dimension(s), data has {len(shape)}", "SHAPE_MISMATCH"
            )
        for dim, size in zip(p.shape, shape):
            expected = out.get(dim) if isinstance(dim, str) else dim
            if expected is None:
                out[dim] = size
            elif int(expected) != size:
                raise DataBindingError(f"{p.symbol}: dimension {dim} is {expected} but data has {size}", "SHAPE_MISMATCH")
        out[p.symbol] = _freeze(value)
    return out


def _freeze(value):
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value
