"""Optimization-model data model and its canonical JSON form.

The JSON layout follows the worked examples: top-level ``constraints``,
``variables`` and ``objective`` arrays, plus a sibling ``parameters`` array of
``{symbol, definition, value, shape}`` entries.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Iterable

from . import dsl
from .errors import DslError, ModelFormatError

log = logging.getLogger(__name__)

VAR_TYPES = ("continuous", "integer", "binary")
SENSES = ("maximize", "minimize")
VIOLATION_CODES = (
    "UNDECLARED_SYMBOL",
    "DUPLICATE_SYMBOL",
    "SHAPE_MISMATCH",
    "BAD_BOUNDS",
    "PARSE_ERROR",
    "NO_OBJECTIVE",
)
_CAMEL_CASE = re.compile(r"^[A-Z][A-Za-z0-9]*$")
_OBJECTIVE_LABEL = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=(?!=)")


@dataclass(frozen=True)
class ExternalRef:
    """Parameter value that is loaded from a data source at binding time."""

    source: str
    key: str | None = None
    toy_range: tuple[float, float] | None = None

    def to_json(self) -> dict:
        out: dict[str, Any] = {"external": self.source}
        if self.key is not None:
            out["key"] = self.key
        if self.toy_range is not None:
            out["toy_range"] = list(self.toy_range)
        return out


@dataclass(frozen=True)
class Parameter:
    symbol: str
    definition: str = ""
    value: Any = None  # number | nested tuple of numbers | ExternalRef
    shape: tuple = ()  # ints, or dimension-parameter names for external values

    @property
    def is_external(self) -> bool:
        return isinstance(self.value, ExternalRef)


@dataclass(frozen=True)
class DecisionVariable:
    symbol: str
    definition: str = ""
    var_type: str = "continuous"
    shape: tuple = ()
    lower_bound: float | None = None
    upper_bound: float | None = None

    def bounds(self) -> tuple[float, float]:
        """Effective bounds: default [0, inf), binaries forced to [0, 1]."""
        if self.var_type == "binary":
            return 0.0, 1.0
        lo = 0.0 if self.lower_bound is None else float(self.lower_bound)
        hi = float("inf") if self.upper_bound is None else float(self.upper_bound)
        return lo, hi


@dataclass(frozen=True)
class Constraint:
    name: str
    description: str
    formulation: str


@dataclass(frozen=True)
class Objective:
    description: str
    formulation: str
    sense: str


@dataclass(frozen=True)
class Provenance:
    kind: str = "llm_formulated"  # llm_formulated | externally_supplied | refined | perturbed
    step: int | None = None
    seed: int | None = None
    op: str | None = None

    def to_json(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        for key in ("step", "seed", "op"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out

    def __str__(self) -> str:
        if self.kind == "refined":
            return f"refined({self.step})"
        if self.kind == "perturbed":
            return f"perturbed({self.seed}, {self.op})"
        return self.kind


@dataclass(frozen=True)
class OptimizationModel:
    parameters: tuple[Parameter, ...] = ()
    variables: tuple[DecisionVariable, ...] = ()
    constraints: tuple[Constraint, ...] = ()
    objective: Objective | None = None
    provenance: Provenance = field(default_factory=Provenance)

    @property
    def variable_symbols(self) -> frozenset[str]:
        return frozenset(v.symbol for v in self.variables)

    @property
    def declared_symbols(self) -> frozenset[str]:
        return frozenset(p.symbol for p in self.parameters) | self.variable_symbols

    def parameter(self, symbol: str) -> Parameter | None:
        return next((p for p in self.parameters if p.symbol == symbol), None)

    def variable(self, symbol: str) -> DecisionVariable | None:
        return next((v for v in self.variables if v.symbol == symbol), None)

    def with_provenance(self, provenance: Provenance) -> "OptimizationModel":
        return replace(self, provenance=provenance)

    def has_external_parameters(self) -> bool:
        return any(p.is_external for p in self.parameters)


@dataclass(frozen=True)
class ProblemInstance:
    id: str
    description: str
    ground_truth_objective: float | None = None
    difficulty: str | None = None
    category: str | None = None

    def __post_init__(self):
        if not self.description or not self.description.strip():
            raise ValueError(f"problem instance {self.id!r} has an empty description")


# ------------------------------------------------------------------ validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    where: str = ""


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def render(self) -> str:
        if self.valid:
            return "model is valid"
        return "\n".join(f"- {v.code} ({v.where}): {v.message}" for v in self.violations)


@lru_cache(maxsize=4096)
def _parse_statement(text: str, variables: frozenset[str]):
    return dsl.parse_constraint(text, variables)


@lru_cache(maxsize=4096)
def _parse_expr(text: str, variables: frozenset[str]):
    return dsl.parse_expression(text, variables)


def objective_text(model: OptimizationModel) -> str:
    """Objective formulation with a leading ``Z =`` style label removed."""
    if model.objective is None:
        raise ValueError("model has no objective")
    text = model.objective.formulation
    m = _OBJECTIVE_LABEL.match(text)
    if m and m.group(1) not in model.declared_symbols:
        text = text[m.end():]
    return text


def parse_constraint_of(model: OptimizationModel, constraint: Constraint):
    return _parse_statement(constraint.formulation, model.variable_symbols)


def parse_objective_of(model: OptimizationModel):
    return _parse_expr(objective_text(model), model.variable_symbols)


def free_symbols(model: OptimizationModel) -> set[str]:
    """Symbols referenced by constraints and objective (index names excluded)."""
    out: set[str] = set()
    for c in model.constraints:
        out |= dsl.referenced_symbols(parse_constraint_of(model, c))
    if model.objective is not None:
        out |= dsl.referenced_symbols(parse_objective_of(model))
    return out


def _nested_depth_matches(value, shape: tuple) -> bool:
    if not shape:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if not isinstance(value, (list, tuple)):
        return False
    dim = shape[0]
    if isinstance(dim, int) and len(value) != dim:
        return False
    return all(_nested_depth_matches(v, shape[1:]) for v in value)


def validate_model(model: OptimizationModel) -> ValidationReport:
    report = ValidationReport()
    add = report.violations.append

    if model.objective is None:
        add(Violation("NO_OBJECTIVE", "model has no objective", "objective"))

    seen: dict[str, str] = {}
    for kind, items in (("parameter", model.parameters), ("variable", model.variables)):
        for item in items:
            if item.symbol in seen:
                add(Violation("DUPLICATE_SYMBOL", f"{item.symbol!r} declared as {seen[item.symbol]} and {kind}", item.symbol))
            else:
                seen[item.symbol] = kind

    param_symbols = {p.symbol for p in model.parameters}
    for p in model.parameters:
        for dim in p.shape:
            if isinstance(dim, str) and dim not in param_symbols:
                add(Violation("UNDECLARED_SYMBOL", f"dimension {dim!r} of {p.symbol} is not a parameter", p.symbol))
            elif isinstance(dim, int) and dim < 0:
                add(Violation("SHAPE_MISMATCH", f"negative dimension in {p.symbol}", p.symbol))
        if p.is_external:
            continue
        if p.value is None or not _nested_depth_matches(p.value, p.shape):
            add(Violation("SHAPE_MISMATCH", f"value of {p.symbol} does not match shape {list(p.shape)}", p.symbol))

    for v in model.variables:
        if v.var_type not in VAR_TYPES:
            add(Violation("BAD_BOUNDS", f"unknown type {v.var_type!r}", v.symbol))
        for dim in v.shape:
            if isinstance(dim, str) and dim not in param_symbols:
                add(Violation("UNDECLARED_SYMBOL", f"dimension {dim!r} of {v.symbol} is not a parameter", v.symbol))
        lo, hi = v.lower_bound, v.upper_bound
        if v.var_type == "binary" and (lo not in (None, 0) or hi not in (None, 1)):
            add(Violation("BAD_BOUNDS", "binary variables have bounds exactly [0, 1]", v.symbol))
        elif (lo if lo is not None else 0.0) > (hi if hi is not None else float("inf")):
            add(Violation("BAD_BOUNDS", f"lower bound {lo} exceeds upper bound {hi}", v.symbol))
        if not _CAMEL_CASE.match(v.symbol):
            report.warnings.append(f"variable symbol {v.symbol!r} is not CamelCase without indices")

    declared = model.declared_symbols
    referenced: set[str] = set()
    for c in model.constraints:
        try:
            referenced |= dsl.referenced_symbols(parse_constraint_of(model, c))
        except DslError as exc:
            add(Violation("PARSE_ERROR", str(exc), c.name))
    if model.objective is not None:
        try:
            referenced |= dsl.referenced_symbols(parse_objective_of(model))
        except DslError as exc:
            add(Violation("PARSE_ERROR", str(exc), "objective"))
    for sym in sorted(referenced - declared):
        add(Violation("UNDECLARED_SYMBOL", f"{sym!r} is used but never declared", sym))
    return report


# -------------------------------------------------------------- JSON handling


def _require(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise ModelFormatError(f"expected an object at {path}", "SCHEMA_ERROR")
    if key not in obj:
        raise ModelFormatError(f"missing required key {key!r} at {path}", "SCHEMA_ERROR")
    return obj[key]


def _warn_extra(obj: dict, known: Iterable[str], path: str) -> None:
    extra = set(obj) - set(known)
    if extra:
        log.warning("ignoring unknown keys %s at %s", sorted(extra), path)


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _thaw(value):
    if isinstance(value, tuple):
        return [_thaw(v) for v in value]
    if isinstance(value, ExternalRef):
        return value.to_json()
    return value


def _infer_shape(value) -> tuple:
    if isinstance(value, (list, tuple)):
        return (len(value),) + (_infer_shape(value[0]) if value else ())
    return ()


def _parse_value(raw, path: str):
    if isinstance(raw, dict):
        if "external" not in raw:
            raise ModelFormatError(f"object values must be external references at {path}", "SCHEMA_ERROR")
        rng = raw.get("toy_range")
        return ExternalRef(str(raw["external"]), raw.get("key"), tuple(rng) if rng else None)
    return _freeze(raw)


def _parse_shape(raw, path: str) -> tuple:
    if not isinstance(raw, list):
        raise ModelFormatError(f"shape must be a list at {path}", "SCHEMA_ERROR")
    out = []
    for dim in raw:
        if isinstance(dim, bool) or not isinstance(dim, (int, str)):
            raise ModelFormatError(f"bad dimension {dim!r} at {path}", "SCHEMA_ERROR")
        out.append(dim)
    return tuple(out)


def _parse_sense(raw: str, path: str) -> str:
    text = str(raw).strip().lower()
    if text.startswith("max"):
        return "maximize"
    if text.startswith("min"):
        return "minimize"
    raise ModelFormatError(f"objective_sense must be Maximize or Minimize, got {raw!r} at {path}", "SCHEMA_ERROR")


def _parse_provenance(raw) -> Provenance:
    if not isinstance(raw, dict) or "kind" not in raw:
        return Provenance()
    return Provenance(raw["kind"], raw.get("step"), raw.get("seed"), raw.get("op"))


def model_from_dict(doc: dict) -> OptimizationModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("model JSON must be an object", "SCHEMA_ERROR")
    _warn_extra(doc, ("parameters", "constraints", "variables", "objective", "provenance"), "$")
    for key in ("constraints", "variables", "objective"):
        _require(doc, key, "$")

    params = []
    for i, raw in enumerate(doc.get("parameters") or []):
        path = f"$.parameters[{i}]"
        _warn_extra(raw, ("symbol", "definition", "value", "shape"), path)
        symbol = str(_require(raw, "symbol", path))
        value = _parse_value(_require(raw, "value", path), path)
        shape = _parse_shape(raw["shape"], path) if "shape" in raw else _infer_shape(value)
        params.append(Parameter(symbol, str(raw.get("definition", "")), value, shape))

    variables = []
    for i, raw in enumerate(doc["variables"]):
        path = f"$.variables[{i}]"
        _warn_extra(raw, ("symbol", "definition", "type", "shape", "lower_bound", "upper_bound"), path)
        symbol = str(_require(raw, "symbol", path))
        vtype = str(_require(raw, "type", path)).strip().lower()
        if vtype not in VAR_TYPES:
            raise ModelFormatError(f"unknown variable type {vtype!r} at {path}.type", "SCHEMA_ERROR")
        variables.append(
            DecisionVariable(
                symbol,
                str(raw.get("definition", "")),
                vtype,
                _parse_shape(raw.get("shape", []), path),
                raw.get("lower_bound"),
                raw.get("upper_bound"),
            )
        )

    constraints = []
    for i, raw in enumerate(doc["constraints"]):
        path = f"$.constraints[{i}]"
        _warn_extra(raw, ("name", "description", "formulation"), path)
        constraints.append(
            Constraint(
                str(raw.get("name", f"Constraint{i + 1}")),
                str(raw.get("description", "")),
                str(_require(raw, "formulation", path)),
            )
        )

    raw_obj = doc["objective"]
    if isinstance(raw_obj, dict):
        raw_obj = [raw_obj]
    if not isinstance(raw_obj, list):
        raise ModelFormatError("objective must be an array at $.objective", "SCHEMA_ERROR")
    if len(raw_obj) > 1:
        raise ModelFormatError("exactly one objective is supported at $.objective", "SCHEMA_ERROR")
    objective = None
    if raw_obj:
        path = "$.objective[0]"
        entry = raw_obj[0]
        _warn_extra(entry, ("description", "formulation", "objective_sense"), path)
        objective = Objective(
            str(entry.get("description", "")),
            str(_require(entry, "formulation", path)),
            _parse_sense(_require(entry, "objective_sense", path), path),
        )
    return OptimizationModel(
        tuple(params), tuple(variables), tuple(constraints), objective, _parse_provenance(doc.get("provenance"))
    )


def parse_model_json(text: str) -> OptimizationModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON: {exc}", "MALFORMED_JSON") from exc
    return model_from_dict(doc)


def model_to_dict(model: OptimizationModel, include_provenance: bool = True) -> dict:
    doc: dict[str, Any] = {
        "parameters": [
            {"symbol": p.symbol, "definition": p.definition, "value": _thaw(p.value), "shape": list(p.shape)}
            for p in model.parameters
        ],
        "constraints": [
            {"name": c.name, "description": c.description, "formulation": c.formulation} for c in model.constraints
        ],
        "variables": [],
        "objective": [],
    }
    for v in model.variables:
        entry: dict[str, Any] = {"symbol": v.symbol, "definition": v.definition, "type": v.var_type, "shape": list(v.shape)}
        if v.lower_bound is not None:
            entry["lower_bound"] = v.lower_bound
        if v.upper_bound is not None:
            entry["upper_bound"] = v.upper_bound
        doc["variables"].append(entry)
    if model.objective is not None:
        o = model.objective
        doc["objective"].append(
            {"description": o.description, "formulation": o.formulation, "objective_sense": o.sense.capitalize()}
        )
    if include_provenance:
        doc["provenance"] = model.provenance.to_json()
    return doc


def serialize_model(model: OptimizationModel, include_provenance: bool = True, indent: int | None = 2) -> str:
    return json.dumps(model_to_dict(model, include_provenance), indent=indent, ensure_ascii=False)


def canonical_key(model: OptimizationModel) -> str:
    """Compact serialization without provenance; equal keys mean the same model content."""
    return json.dumps(model_to_dict(model, include_provenance=False), sort_keys=False, separators=(",", ":"))


def normalize_formulations(model: OptimizationModel) -> OptimizationModel:
    """Reprint every formulation in canonical form (model must parse)."""
    constraints = tuple(
        replace(c, formulation=dsl.print_canonical(parse_constraint_of(model, c))) for c in model.constraints
    )
    objective = model.objective
    if objective is not None:
        objective = replace(objective, formulation=dsl.print_canonical(parse_objective_of(model)))
    return replace(model, constraints=constraints, objective=objective)


def load_model(path) -> OptimizationModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model_json(fh.read())
