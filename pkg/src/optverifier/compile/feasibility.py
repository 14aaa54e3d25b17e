"""Check a candidate assignment against every row, bound and integrality requirement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from ..errors import SolverError
from .grounding import GroundedModel
from .lp_writer import fmt
from .solvers import Solution


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-6
    rel_tol: float = 1e-6
    int_tol: float = 1e-5

    def allowed(self, reference: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(reference))


@dataclass(frozen=True)
class RowViolation:
    row: str
    lhs: float
    relop: str
    rhs: float
    magnitude: float


@dataclass(frozen=True)
class VarViolation:
    variable: str
    value: float
    detail: str
    magnitude: float


@dataclass
class FeasibilityReport:
    violated_rows: list[RowViolation] = field(default_factory=list)
    integrality_violations: list[VarViolation] = field(default_factory=list)
    bound_violations: list[VarViolation] = field(default_factory=list)
    objective_recomputed: float | None = None

    @property
    def feasible(self) -> bool:
        return not (self.violated_rows or self.integrality_violations or self.bound_violations)

    def render(self) -> str:
        if self.feasible:
            obj = "" if self.objective_recomputed is None else f" Objective value {fmt(self.objective_recomputed)}."
            return f"Deterministic check: the solution satisfies every constraint, bound and integrality requirement.{obj}"
        lines = ["Deterministic check found violations:"]
        for v in self.violated_rows:
            lines.append(f"- row {v.row}: lhs {fmt(v.lhs)} {v.relop} {fmt(v.rhs)} violated by {fmt(v.magnitude)}")
        for v in self.bound_violations:
            lines.append(f"- variable {v.variable} = {fmt(v.value)} breaks its bound ({v.detail})")
        for v in self.integrality_violations:
            lines.append(f"- variable {v.variable} = {fmt(v.value)} should be {v.detail}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "feasible": self.feasible,
            "objective_recomputed": self.objective_recomputed,
            "violated_rows": [vars(v) for v in self.violated_rows],
            "integrality_violations": [vars(v) for v in self.integrality_violations],
            "bound_violations": [vars(v) for v in self.bound_violations],
        }


def check_feasibility(
    grounded: GroundedModel,
    solution: Solution | Mapping[str, float],
    tolerances: Tolerances | None = None,
) -> FeasibilityReport:
    tol = tolerances or Tolerances()
    assignment = solution.assignment if isinstance(solution, Solution) else solution
    missing = [v.name for v in grounded.variables if v.name not in assignment]
    if missing:
        raise SolverError(f"assignment lacks {len(missing)} variable(s), first {missing[0]}", "MISSING_VARIABLE")
    report = FeasibilityReport()
    for row in grounded.rows:
        lhs = row.lhs_value(assignment)
        if row.relop == "<=":
            excess = lhs - row.rhs
        elif row.relop == ">=":
            excess = row.rhs - lhs
        else:
            excess = abs(lhs - row.rhs)
        if excess > tol.allowed(row.rhs):
            report.violated_rows.append(RowViolation(row.name, lhs, row.relop, row.rhs, excess))
    for v in grounded.variables:
        x = float(assignment[v.name])
        if x < v.lower - tol.allowed(v.lower):
            report.bound_violations.append(VarViolation(v.name, x, f"lower {fmt(v.lower)}", v.lower - x))
        elif x > v.upper + tol.allowed(v.upper):
            report.bound_violations.append(VarViolation(v.name, x, f"upper {fmt(v.upper)}", x - v.upper))
        if v.var_type in ("integer", "binary"):
            gap = abs(x - round(x))
            if gap > tol.int_tol:
                report.integrality_violations.append(VarViolation(v.name, x, v.var_type, gap))
    report.objective_recomputed = grounded.objective.value(assignment)
    return report
