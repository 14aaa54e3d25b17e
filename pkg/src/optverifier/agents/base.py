"""Shared agent types: verdicts, narratives, the yes-token rule and prompt context helpers."""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass
from typing import Protocol

from ..compile.solvers import Solution
from ..events import EventLog
from ..model_ir import OptimizationModel, ProblemInstance, model_to_dict, serialize_model
from ..structure import ModelingStructure

EMPTY_REPLY_COMMENT = "(the evaluator returned an empty reply)"
_REFUSAL = re.compile(r"^(i\s+(can't|cannot|won't|am unable)|sorry|as an ai)", re.IGNORECASE)
MAX_VALUE_CHARS = 2000
MAX_SOLUTION_LINES = 200


@dataclass(frozen=True)
class Verdict:
    score: int
    comment: str = ""
    anomaly: str = ""

    def __post_init__(self):
        if self.score not in (0, 1):
            raise ValueError("score must be 0 or 1")
        if self.score == 0 and not self.comment.strip():
            raise ValueError("a rejecting verdict needs a comment")

    def to_json(self) -> dict:
        out = {"score": self.score, "comment": self.comment}
        if self.anomaly:
            out["anomaly"] = self.anomaly
        return out


@dataclass(frozen=True)
class SolutionNarrative:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("solution narrative must be non-empty")


def first_token_is_yes(reply: str) -> bool:
    parts = reply.split(None, 1)
    if not parts:
        return False
    return parts[0].rstrip(string.punctuation).lower() == "yes"


def score_reply(reply: str) -> Verdict:
    """Score 1 iff the first whitespace-delimited token is "yes" (any case, trailing punctuation allowed)."""
    text = reply.strip()
    if not text:
        return Verdict(0, EMPTY_REPLY_COMMENT, anomaly="empty reply")
    if first_token_is_yes(text):
        return Verdict(1, "")
    anomaly = "refusal" if _REFUSAL.match(text) else ""
    return Verdict(0, text, anomaly)


# ------------------------------------------------------------ prompt context


@dataclass(frozen=True)
class SolutionContext:
    """Everything the solution-side conversation shows the model."""

    problem_type: str
    solutions: str
    formulation: str
    feasibility: str
    feasible: bool | None = None


@dataclass(frozen=True)
class RefineContext:
    """Which verification step produced the comment that drives a refinement."""

    kind: str  # structure | solution | check
    interpreted: ModelingStructure | None = None
    solution: SolutionContext | None = None
    narrative: str = ""


def parameters_text(model: OptimizationModel) -> str:
    entries = []
    for p in model_to_dict(model, include_provenance=False)["parameters"]:
        if len(json.dumps(p["value"])) > MAX_VALUE_CHARS:
            p = dict(p, value=f"<{len(json.dumps(p['value']))} characters of data omitted>")
        entries.append(p)
    return json.dumps(entries, indent=2, ensure_ascii=False)


def model_json(model: OptimizationModel) -> str:
    return serialize_model(model, include_provenance=False)


def formulation_text(model: OptimizationModel) -> str:
    lines = ["Variables:"]
    for v in model.variables:
        shape = f", shape {list(v.shape)}" if v.shape else ""
        lines.append(f"- {v.symbol} ({v.var_type}{shape}): {v.definition}")
    if model.objective is not None:
        lines.append(f"Objective ({model.objective.sense}): {model.objective.formulation}")
    lines.append("Constraints:")
    for c in model.constraints:
        lines.append(f"- {c.name}: {c.formulation}")
    return "\n".join(lines)


def _num(v: float) -> str:
    return format(v, ".12g")


def solution_text(solution: Solution) -> str:
    lines = [f"Status: {solution.status}"]
    if solution.objective_value is not None:
        lines.append(f"Objective value: {_num(solution.objective_value)}")
    nonzero = [(k, v) for k, v in solution.assignment.items() if abs(v) > 1e-9]
    if solution.assignment:
        lines.append("Nonzero variable values (all others are 0):")
        for k, v in nonzero[:MAX_SOLUTION_LINES]:
            lines.append(f"{k} = {_num(v)}")
        if len(nonzero) > MAX_SOLUTION_LINES:
            lines.append(f"... {len(nonzero) - MAX_SOLUTION_LINES} more nonzero values omitted")
    return "\n".join(lines)


class Agents(Protocol):
    """The seven agent operations; every LLM-backed call appends one event to ``log``."""

    def distill(self, problem: ProblemInstance, log: EventLog) -> ModelingStructure: ...

    def formulate(self, problem: ProblemInstance, structure: ModelingStructure, log: EventLog) -> OptimizationModel: ...

    def interpret_structure(self, model: OptimizationModel, log: EventLog) -> ModelingStructure: ...

    def evaluate_structure(self, reference: ModelingStructure, candidate: ModelingStructure,
                           model: OptimizationModel, log: EventLog) -> Verdict: ...

    def interpret_solution(self, solution: Solution, problem: ProblemInstance, context: SolutionContext,
                           log: EventLog) -> SolutionNarrative: ...

    def evaluate_solution(self, problem: ProblemInstance, narrative: SolutionNarrative, context: SolutionContext,
                          log: EventLog) -> Verdict: ...

    def refine(self, problem: ProblemInstance, structure: ModelingStructure, model: OptimizationModel, comment: str,
               context: RefineContext, step: int, log: EventLog) -> OptimizationModel: ...
