"""Controlled model perturbations used as negative samples in the verifier study."""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .. import dsl
from ..errors import BenchError, DslError
from ..model_ir import (
    OptimizationModel,
    Provenance,
    canonical_key,
    normalize_formulations,
    parse_constraint_of,
    parse_objective_of,
    validate_model,
)

OPS = ("drop_constraint", "drop_variable", "flip_relop", "scale_rhs", "drop_sum_guard", "flip_var_type")
MAX_DRAWS = 100
SCALE_FACTORS = (2, 0.5)


@dataclass(frozen=True)
class PerturbationSpec:
    seed: int = 0
    k: int = 9
    ops: tuple[str, ...] = OPS

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not self.ops:
            raise ValueError("at least one perturbation op must be enabled")
        unknown = set(self.ops) - set(OPS)
        if unknown:
            raise ValueError(f"unknown perturbation ops: {sorted(unknown)}")


# ------------------------------------------------------------ AST rewriting


def _has_var(node) -> bool:
    return any(isinstance(n, dsl.VarRef) for n in dsl.walk(node))


def _without(node, symbol: str):
    """``node`` with every term mentioning ``symbol`` removed; None stands for zero."""
    if isinstance(node, dsl.VarRef):
        return None if node.symbol == symbol else node
    if isinstance(node, dsl.Neg):
        inner = _without(node.operand, symbol)
        return None if inner is None else dsl.Neg(inner)
    if isinstance(node, dsl.Add):
        left, right = _without(node.left, symbol), _without(node.right, symbol)
        if left is None or right is None:
            return right if left is None else left
        return dsl.Add(left, right)
    if isinstance(node, dsl.Sub):
        left, right = _without(node.left, symbol), _without(node.right, symbol)
        if right is None:
            return left
        return dsl.Neg(right) if left is None else dsl.Sub(left, right)
    if isinstance(node, dsl.ScalarMul):
        left, right = _without(node.left, symbol), _without(node.right, symbol)
        return None if left is None or right is None else dsl.ScalarMul(left, right)
    if isinstance(node, dsl.Sum):
        body = _without(node.body, symbol)
        return None if body is None else replace(node, body=body)
    return node


def _sums_with_guard(node) -> list:
    return [n for n in dsl.walk(node) if isinstance(n, dsl.Sum) and n.guard is not None]


def _strip_guard(node, target):
    """Copy of ``node`` with the guard of the sum ``target`` (by identity) removed."""
    if node is target:
        return replace(node, guard=None, body=_strip_guard(node.body, target))
    if isinstance(node, (dsl.Add, dsl.Sub, dsl.ScalarMul)):
        return type(node)(_strip_guard(node.left, target), _strip_guard(node.right, target))
    if isinstance(node, dsl.Neg):
        return dsl.Neg(_strip_guard(node.operand, target))
    if isinstance(node, dsl.Sum):
        return replace(node, body=_strip_guard(node.body, target))
    if isinstance(node, dsl.ConstraintAst):
        return replace(node, lhs=_strip_guard(node.lhs, target), rhs=_strip_guard(node.rhs, target))
    return node


# ------------------------------------------------------------ single ops


def _set_constraint(model: OptimizationModel, i: int, ast) -> OptimizationModel:
    constraints = list(model.constraints)
    constraints[i] = replace(constraints[i], formulation=dsl.print_canonical(ast))
    return replace(model, constraints=tuple(constraints))


def _inequalities(model: OptimizationModel) -> list[tuple[int, dsl.ConstraintAst]]:
    out = []
    for i, c in enumerate(model.constraints):
        ast = parse_constraint_of(model, c)
        if isinstance(ast, dsl.ConstraintAst) and _has_var(ast):
            out.append((i, ast))
    return out


def op_drop_constraint(model: OptimizationModel, rng: random.Random) -> OptimizationModel | None:
    if not model.constraints:
        return None
    i = rng.randrange(len(model.constraints))
    return replace(model, constraints=model.constraints[:i] + model.constraints[i + 1:])


def op_drop_variable(model: OptimizationModel, rng: random.Random) -> OptimizationModel | None:
    if not model.variables:
        return None
    symbol = model.variables[rng.randrange(len(model.variables))].symbol
    constraints = []
    for c in model.constraints:
        ast = parse_constraint_of(model, c)
        if isinstance(ast, dsl.DomainDecl):
            if ast.target.symbol != symbol:
                constraints.append(c)
            continue
        lhs, rhs = _without(ast.lhs, symbol), _without(ast.rhs, symbol)
        lhs, rhs = lhs if lhs is not None else dsl.Num(0), rhs if rhs is not None else dsl.Num(0)
        if not (_has_var(lhs) or _has_var(rhs)):
            continue  # nothing left to constrain
        new = replace(ast, lhs=lhs, rhs=rhs)
        constraints.append(c if new == ast else replace(c, formulation=dsl.print_canonical(new)))
    objective = model.objective
    if objective is not None:
        expr = _without(parse_objective_of(model), symbol)
        if expr is None or not _has_var(expr):
            return None
        objective = replace(objective, formulation=dsl.print_canonical(expr))
    variables = tuple(v for v in model.variables if v.symbol != symbol)
    return replace(model, variables=variables, constraints=tuple(constraints), objective=objective)


def op_flip_relop(model: OptimizationModel, rng: random.Random) -> OptimizationModel | None:
    candidates = [(i, a) for i, a in _inequalities(model) if a.relop in ("<=", ">=")]
    if not candidates:
        return None
    i, ast = candidates[rng.randrange(len(candidates))]
    return _set_constraint(model, i, replace(ast, relop="<=" if ast.relop == ">=" else ">="))


def op_scale_rhs(model: OptimizationModel, rng: random.Random) -> OptimizationModel | None:
    candidates = _inequalities(model)
    if not candidates:
        return None
    i, ast = candidates[rng.randrange(len(candidates))]
    factor = SCALE_FACTORS[rng.randrange(len(SCALE_FACTORS))]
    if isinstance(ast.rhs, dsl.Num):
        rhs = dsl.Num(ast.rhs.value * factor)
    else:
        rhs = dsl.ScalarMul(dsl.Num(factor), ast.rhs)
    return _set_constraint(model, i, replace(ast, rhs=rhs))


def op_drop_sum_guard(model: OptimizationModel, rng: random.Random) -> OptimizationModel | None:
    candidates = [(i, a, s) for i, a in _inequalities(model) for s in _sums_with_guard(a)]
    if not candidates:
        return None
    i, ast, target = candidates[rng.randrange(len(candidates))]
    return _set_constraint(model, i, _strip_guard(ast, target))


def op_flip_var_type(model: OptimizationModel, rng: random.Random) -> OptimizationModel | None:
    discrete = {v.symbol for v in model.variables if v.var_type in ("integer", "binary")}
    for c in model.constraints:
        ast = parse_constraint_of(model, c)
        if isinstance(ast, dsl.DomainDecl) and isinstance(ast.target, dsl.VarRef):
            discrete.add(ast.target.symbol)
    if not discrete:
        return None
    symbol = sorted(discrete)[rng.randrange(len(discrete))]
    var = model.variable(symbol)
    binary = var.var_type == "binary" or any(
        isinstance(a, dsl.DomainDecl) and a.target.symbol == symbol and a.domain == "Binary"
        for a in (parse_constraint_of(model, c) for c in model.constraints)
    )
    if binary:
        var = replace(var, var_type="continuous", lower_bound=0, upper_bound=1)
    else:
        var = replace(var, var_type="continuous")
    variables = tuple(var if v.symbol == symbol else v for v in model.variables)
    constraints = tuple(
        c for c in model.constraints
        if not (isinstance(a := parse_constraint_of(model, c), dsl.DomainDecl) and a.target.symbol == symbol)
    )
    return replace(model, variables=variables, constraints=constraints)


OP_FUNCS = {
    "drop_constraint": op_drop_constraint,
    "drop_variable": op_drop_variable,
    "flip_relop": op_flip_relop,
    "scale_rhs": op_scale_rhs,
    "drop_sum_guard": op_drop_sum_guard,
    "flip_var_type": op_flip_var_type,
}


def apply_op(model: OptimizationModel, op: str, rng: random.Random) -> OptimizationModel | None:
    """One random application of ``op``; None when the op has no target in ``model``."""
    return OP_FUNCS[op](model, rng)


def _key(model: OptimizationModel) -> str:
    try:
        return canonical_key(normalize_formulations(model))
    except DslError:
        return canonical_key(model)


def perturb_model(model: OptimizationModel, spec: PerturbationSpec) -> list[OptimizationModel]:
    """``spec.k`` pairwise distinct, valid perturbations of ``model``, deterministic in ``spec``."""
    if not validate_model(model).valid:
        raise ValueError("perturb_model needs a valid model")
    if not model.constraints:
        raise ValueError("perturb_model needs at least one constraint")
    rng = random.Random(spec.seed)
    seen = {_key(model)}
    out: list[OptimizationModel] = []
    for slot in range(spec.k):
        for _ in range(MAX_DRAWS):
            op = spec.ops[rng.randrange(len(spec.ops))]
            candidate = apply_op(model, op, rng)
            if candidate is None or not validate_model(candidate).valid:
                continue
            key = _key(candidate)
            if key in seen:
                continue
            seen.add(key)
            out.append(candidate.with_provenance(Provenance("perturbed", seed=spec.seed, op=op)))
            break
        else:
            raise BenchError(
                f"only {len(out)} of {spec.k} distinct valid perturbations found "
                f"(slot {slot} exhausted {MAX_DRAWS} draws)", "PERTURBATION_EXHAUSTED",
            )
    return out
