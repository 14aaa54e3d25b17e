"""Expand an indexed model into flat affine rows over flat variables.

Flat variables are named ``Symbol[i,j]`` (scalars keep the bare symbol).
Rows are named after their constraint, CamelCased, with the quantifier
values appended (``CapacityWarehouse_5``).  ``Var >= 0`` constraints and
``in Integers`` / ``in Binary`` declarations become bounds and types
instead of rows.
"""

from __future__ import annotations

import itertools
import logging
import math
import re
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from .. import dsl
from ..errors import CompileError
from ..model_ir import OptimizationModel, Parameter, parse_constraint_of, parse_objective_of

log = logging.getLogger(__name__)

INF = float("inf")
MAX_FLAT_VARIABLES = 1_000_000


@dataclass(frozen=True)
class FlatVar:
    name: str
    var_type: str  # continuous | integer | binary
    lower: float = 0.0
    upper: float = INF


@dataclass(frozen=True)
class Row:
    name: str
    coeffs: dict  # flat var name -> coefficient, declaration order
    relop: str  # <= | >= | ==
    rhs: float

    def lhs_value(self, assignment: Mapping[str, float]) -> float:
        return sum(c * assignment[v] for v, c in self.coeffs.items())


@dataclass(frozen=True)
class GroundedObjective:
    sense: str
    coeffs: dict
    constant: float = 0.0

    def value(self, assignment: Mapping[str, float]) -> float:
        return self.constant + sum(c * assignment[v] for v, c in self.coeffs.items())


@dataclass
class GroundedModel:
    variables: list[FlatVar]
    rows: list[Row]
    objective: GroundedObjective
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._index = {v.name: i for i, v in enumerate(self.variables)}

    @property
    def variable_names(self) -> list[str]:
        return [v.name for v in self.variables]

    def var(self, name: str) -> FlatVar:
        return self.variables[self._index[name]]

    def row(self, name: str) -> Row:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def rows_of(self, prefix: str) -> list[Row]:
        """Rows generated from the constraint whose row-name stem is ``prefix``."""
        return [r for r in self.rows if r.name == prefix or r.name.startswith(prefix + "_")]


def flat_name(symbol: str, index: tuple) -> str:
    return symbol if not index else f"{symbol}[{','.join(str(i) for i in index)}]"


def row_stem(name: str) -> str:
    """CamelCase identifier for a constraint name: "Weight Limit Constraint" -> "WeightLimitConstraint"."""
    parts = re.findall(r"[A-Za-z0-9]+", name)
    stem = "".join(p[0].upper() + p[1:] for p in parts) or "Row"
    if stem[0].isdigit():
        stem = "C" + stem
    return stem


# -------------------------------------------------------------- value binding


def _as_number(value: Any, symbol: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CompileError(f"parameter {symbol} is not a scalar number", "SHAPE_MISMATCH")
    return value


class _Env:
    """Resolved parameter values, index sets and variable shapes for one grounding."""

    def __init__(self, model: OptimizationModel, bindings: Mapping[str, Any] | None):
        self.model = model
        self.bindings = dict(bindings or {})
        self.params: dict[str, Parameter] = {p.symbol: p for p in model.parameters}
        self._values: dict[str, Any] = {}

    def value(self, symbol: str):
        if symbol in self._values:
            return self._values[symbol]
        if symbol in self.bindings:
            val = self.bindings[symbol]
        else:
            p = self.params.get(symbol)
            if p is None:
                raise CompileError(f"{symbol} is not a declared parameter", "UNBOUND_PARAMETER")
            if p.is_external or p.value is None:
                raise CompileError(f"parameter {symbol} has no concrete value (external data not bound)", "UNBOUND_PARAMETER")
            val = p.value
        if isinstance(val, list):
            val = _freeze(val)
        self._values[symbol] = val
        return val

    def dim(self, d) -> int:
        if isinstance(d, int):
            return d
        val = self.value(d)
        if isinstance(val, bool) or not isinstance(val, (int, float)) or val != int(val) or val < 0:
            raise CompileError(f"dimension {d} must be a non-negative integer", "SHAPE_MISMATCH")
        return int(val)

    def index_set(self, symbol: str) -> list[int]:
        val = self.value(symbol)
        if isinstance(val, tuple):
            out = []
            for v in val:
                if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v):
                    raise CompileError(f"index set {symbol} must hold integers", "SHAPE_MISMATCH")
                out.append(int(v))
            return out
        if isinstance(val, (int, float)) and not isinstance(val, bool) and val == int(val) and val >= 0:
            return list(range(int(val)))
        raise CompileError(f"{symbol} cannot be used as an index set", "SHAPE_MISMATCH")

    def param_entry(self, symbol: str, index: tuple) -> float:
        val = self.value(symbol)
        cur = val
        for depth, i in enumerate(index):
            if not isinstance(cur, tuple):
                raise CompileError(f"{symbol} has fewer than {depth + 1} dimensions", "SHAPE_MISMATCH")
            if not 0 <= i < len(cur):
                raise CompileError(f"index {i} out of range for {symbol} (size {len(cur)})", "INDEX_OUT_OF_RANGE")
            cur = cur[i]
        return _as_number(cur, symbol)


def _freeze(value):
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


# --------------------------------------------------------------- affine terms


class _Affine:
    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs=None, const: float = 0.0):
        self.coeffs: dict[str, float] = coeffs if coeffs is not None else {}
        self.const = const

    def add(self, other: "_Affine", sign: float = 1.0) -> "_Affine":
        for k, v in other.coeffs.items():
            self.coeffs[k] = self.coeffs.get(k, 0.0) + sign * v
        self.const += sign * other.const
        return self

    def scale(self, factor: float) -> "_Affine":
        for k in self.coeffs:
            self.coeffs[k] *= factor
        self.const *= factor
        return self

    @property
    def is_constant(self) -> bool:
        return all(v == 0 for v in self.coeffs.values())


class _Grounder:
    def __init__(self, model: OptimizationModel, bindings):
        self.model = model
        self.env = _Env(model, bindings)
        self.var_shapes = {v.symbol: tuple(self.env.dim(d) for d in v.shape) for v in model.variables}

    def index_value(self, idx, scope: Mapping[str, int]) -> int:
        return idx if isinstance(idx, int) else scope[idx]

    def var_name(self, ref: dsl.VarRef, scope) -> str:
        shape = self.var_shapes[ref.symbol]
        index = tuple(self.index_value(i, scope) for i in ref.indices)
        if len(index) != len(shape):
            raise CompileError(
                f"{ref.symbol} has {len(shape)} dimensions but is used with {len(index)} indices", "SHAPE_MISMATCH"
            )
        for i, n in zip(index, shape):
            if not 0 <= i < n:
                raise CompileError(f"index {i} out of range for {ref.symbol} (size {n})", "INDEX_OUT_OF_RANGE")
        return flat_name(ref.symbol, index)

    def guard_holds(self, guard: dsl.Guard | None, scope) -> bool:
        if guard is None:
            return True
        a, b = scope[guard.left], scope[guard.right]
        return {"!=": a != b, "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[guard.op]

    def binder_scopes(self, binders, guard, scope):
        sets = [self.env.index_set(b.index_set) for b in binders]
        for combo in itertools.product(*sets):
            inner = dict(scope)
            inner.update({b.index: v for b, v in zip(binders, combo)})
            if self.guard_holds(guard, inner):
                yield inner

    def expr(self, node, scope) -> _Affine:
        if isinstance(node, dsl.Num):
            return _Affine(const=float(node.value))
        if isinstance(node, dsl.ParamRef):
            if node.symbol in self.var_shapes:
                return self.expr(dsl.VarRef(node.symbol, node.indices, node.pos), scope)
            index = tuple(self.index_value(i, scope) for i in node.indices)
            return _Affine(const=float(self.env.param_entry(node.symbol, index)))
        if isinstance(node, dsl.VarRef):
            return _Affine({self.var_name(node, scope): 1.0})
        if isinstance(node, dsl.Neg):
            return self.expr(node.operand, scope).scale(-1.0)
        if isinstance(node, dsl.Add):
            return self.expr(node.left, scope).add(self.expr(node.right, scope))
        if isinstance(node, dsl.Sub):
            return self.expr(node.left, scope).add(self.expr(node.right, scope), -1.0)
        if isinstance(node, dsl.ScalarMul):
            left, right = self.expr(node.left, scope), self.expr(node.right, scope)
            if left.is_constant:
                return right.scale(left.const)
            if right.is_constant:
                return left.scale(right.const)
            raise CompileError("product of decision variables is not linear", "NONLINEAR")
        if isinstance(node, dsl.Sum):
            total = _Affine()
            for inner in self.binder_scopes(node.binders, node.guard, scope):
                total.add(self.expr(node.body, inner))
            return total
        raise TypeError(f"unexpected node {node!r}")

    def quantifier_scopes(self, quants):
        scopes = [{}]
        for q in quants:
            values = self.env.index_set(q.index_set)
            nxt = []
            for s in scopes:
                for v in values:
                    inner = dict(s)
                    inner[q.index] = v
                    if self.guard_holds(q.guard, inner):
                        nxt.append(inner)
            scopes = nxt
        return scopes


def _nonneg_target(stmt) -> dsl.VarRef | None:
    """``Var >= 0`` or ``0 <= Var`` (possibly indexed) lowers to a bound."""
    if not isinstance(stmt, dsl.ConstraintAst):
        return None
    lhs, rhs, op = stmt.lhs, stmt.rhs, stmt.relop
    if op == ">=" and isinstance(lhs, dsl.VarRef) and isinstance(rhs, dsl.Num) and rhs.value == 0:
        return lhs
    if op == "<=" and isinstance(rhs, dsl.VarRef) and isinstance(lhs, dsl.Num) and lhs.value == 0:
        return rhs
    return None


def _clean(coeffs: dict) -> dict:
    return {k: v for k, v in coeffs.items() if v != 0}


def ground(model: OptimizationModel, bindings: Mapping[str, Any] | None = None) -> GroundedModel:
    """Expand sums and quantifiers over concrete index sets into affine rows."""
    bindings = dict(bindings or {})
    unbound = [p.symbol for p in model.parameters if p.is_external and p.symbol not in bindings]
    if unbound:
        # fail before sizing anything: the declared dimensions of an unbound model may be huge
        raise CompileError(f"parameter {unbound[0]} has no concrete value (external data not bound)",
                           "UNBOUND_PARAMETER")
    g = _Grounder(model, bindings)
    total = sum(math.prod(shape) for shape in g.var_shapes.values())
    if total > MAX_FLAT_VARIABLES:
        raise CompileError(f"model expands to {total} variables (limit {MAX_FLAT_VARIABLES})", "MODEL_TOO_LARGE")
    warnings: list[str] = []

    var_types: dict[str, str] = {}
    lower: dict[str, float] = {}
    upper: dict[str, float] = {}
    order: list[str] = []
    for v in model.variables:
        lo, hi = v.bounds()
        for index in itertools.product(*(range(n) for n in g.var_shapes[v.symbol])):
            name = flat_name(v.symbol, index)
            order.append(name)
            var_types[name] = v.var_type
            lower[name], upper[name] = lo, hi

    rows: list[Row] = []
    used_names: dict[str, int] = {}

    def unique(name: str) -> str:
        n = used_names.get(name, 0) + 1
        used_names[name] = n
        return name if n == 1 else f"{name}_{n}"

    for c in model.constraints:
        stmt = parse_constraint_of(model, c)
        if isinstance(stmt, dsl.DomainDecl) and isinstance(stmt.target, dsl.ParamRef):
            raise CompileError(f"{stmt.target.symbol} is not a decision variable ({c.name})", "UNBOUND_PARAMETER")
        scopes = g.quantifier_scopes(stmt.quantifiers)
        if not scopes:
            warnings.append(f"EMPTY_INDEX_SET: constraint {c.name!r} expands to no rows")
            continue
        if isinstance(stmt, dsl.DomainDecl):
            for scope in scopes:
                name = g.var_name(stmt.target, scope)
                if stmt.domain == "Binary":
                    var_types[name] = "binary"
                    lower[name], upper[name] = max(lower[name], 0.0), min(upper[name], 1.0)
                elif var_types[name] == "continuous":
                    var_types[name] = "integer"
            continue
        target = _nonneg_target(stmt)
        if target is not None:
            for scope in scopes:
                name = g.var_name(target, scope)
                lower[name] = max(lower[name], 0.0)
            continue
        stem = row_stem(c.name)
        for scope in scopes:
            lhs = g.expr(stmt.lhs, scope)
            rhs = g.expr(stmt.rhs, scope)
            lhs.add(rhs, -1.0)
            coeffs = _clean(lhs.coeffs)
            bound = -lhs.const
            suffix = "".join(f"_{scope[q.index]}" for q in stmt.quantifiers)
            if not coeffs:
                if _holds(0.0, stmt.relop, bound):
                    continue
                warnings.append(f"constraint {c.name!r} has a constant row that can never hold")
            if not math.isfinite(bound):
                raise CompileError(f"non-finite right-hand side in {c.name!r}", "SHAPE_MISMATCH")
            rows.append(Row(unique(stem + suffix), coeffs, stmt.relop, bound))

    if model.objective is None:
        raise CompileError("model has no objective", "NO_OBJECTIVE")
    obj = g.expr(parse_objective_of(model), {})
    objective = GroundedObjective(model.objective.sense, _clean(obj.coeffs), obj.const)

    variables = []
    for name in order:
        t = var_types[name]
        lo, hi = lower[name], upper[name]
        if t == "binary":
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        variables.append(FlatVar(name, t, lo, hi))
    for w in warnings:
        log.warning(w)
    return GroundedModel(variables, rows, objective, warnings)


def _holds(lhs: float, relop: str, rhs: float, tol: float = 1e-9) -> bool:
    if relop == "<=":
        return lhs <= rhs + tol
    if relop == ">=":
        return lhs >= rhs - tol
    return abs(lhs - rhs) <= tol


def bind_model(model: OptimizationModel, bindings: Mapping[str, Any]) -> OptimizationModel:
    """Copy of ``model`` with parameter values (and symbolic shapes) made concrete."""
    env = _Env(model, bindings)
    params = []
    for p in model.parameters:
        if p.symbol in bindings or not p.is_external:
            value = env.value(p.symbol) if (p.symbol in bindings or p.value is not None) else p.value
            shape = tuple(env.dim(d) for d in p.shape)
            params.append(replace(p, value=value, shape=shape))
        else:
            params.append(p)
    variables = tuple(replace(v, shape=tuple(env.dim(d) for d in v.shape)) for v in model.variables)
    return replace(model, parameters=tuple(params), variables=variables)


__all__ = [
    "FlatVar", "Row", "GroundedObjective", "GroundedModel", "ground", "bind_model", "flat_name", "row_stem",
]
