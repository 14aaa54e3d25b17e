"""Deterministic rule-based agents for offline, oracle-grounded runs.

* distill looks up a worked model by keywords in the description and reads
  its structure off that model;
* interpret_structure lists one low-level entry per constraint (repeated names
  are numbered) and one per decision variable;
* evaluate_structure accepts iff the structure diff is identical;
* evaluate_solution accepts iff the deterministic feasibility check passed;
* formulate and refine return the matching worked model.
"""

from __future__ import annotations

import json
from dataclasses import replace

from ..compile.solvers import Solution
from ..errors import AgentError
from ..events import EventLog, digest
from ..gateway import estimate_tokens
from ..model_ir import OptimizationModel, ProblemInstance, Provenance, canonical_key
from ..structure import ModelingStructure, structure_diff
from . import library
from .base import RefineContext, SolutionContext, SolutionNarrative, Verdict, solution_text


def mock_interpret(model: OptimizationModel, provenance: str = "interpreted_from_model") -> ModelingStructure:
    parts = [c.name + " " + c.description for c in model.constraints]
    parts += [v.definition for v in model.variables]
    if model.objective is not None:
        parts.append(model.objective.description)
    problem_type, specific_type = library.classify(" ".join(parts))
    entries: list[tuple[str, str]] = []
    counts: dict[str, int] = {}
    for c in model.constraints:
        counts[c.name] = counts.get(c.name, 0) + 1
        name = c.name if counts[c.name] == 1 else f"{c.name} {counts[c.name]}"
        entries.append((name, c.description or c.formulation))
    for v in model.variables:
        entries.append((f"{v.symbol} variable", v.definition or v.var_type))
    # a generated name can collide with a real one ("A 2"); keep the first occurrence
    seen, unique = set(), []
    for name, desc in entries:
        if name not in seen:
            seen.add(name)
            unique.append((name, desc))
    return ModelingStructure(problem_type, specific_type, (), tuple(unique), provenance)


class MockAgents:
    def __init__(self, models: dict[str, OptimizationModel] | None = None):
        # optional extra worked models keyed by a keyword found in the description
        self.models = dict(models or {})

    @staticmethod
    def _log(events: EventLog, stage: str, prompt: str, output: str, detail: str = "") -> None:
        events.llm(
            stage, events.now(), 0.0, estimate_tokens(prompt), estimate_tokens(output), True,
            digest(stage + "\n" + prompt), output, detail,
        )

    def _lookup(self, text: str) -> OptimizationModel | None:
        lowered = text.lower()
        for key, model in self.models.items():
            if key.lower() in lowered:
                return model
        name = library.match_worked_model(text)
        return library.worked_model(name) if name else None

    def distill(self, problem: ProblemInstance, events: EventLog) -> ModelingStructure:
        model = self._lookup(problem.description)
        if model is None:
            ptype, stype = library.classify(problem.description)
            structure = ModelingStructure(ptype, stype, (), (), "distilled_from_description")
        else:
            structure = mock_interpret(model, "distilled_from_description")
        self._log(events, "distill", problem.description, structure.to_json())
        return structure

    def formulate(self, problem: ProblemInstance, structure: ModelingStructure, events: EventLog) -> OptimizationModel:
        model = self._lookup(problem.description)
        self._log(events, "formulate", problem.description, "parameters", "parameters")
        if model is None:
            self._log(events, "formulate", problem.description, "no matching worked model", "model")
            raise AgentError(f"no worked model matches problem {problem.id!r}")
        model = replace(model, provenance=Provenance("llm_formulated"))
        self._log(events, "formulate", problem.description, canonical_key(model), "model")
        return model

    def interpret_structure(self, model: OptimizationModel, events: EventLog) -> ModelingStructure:
        structure = mock_interpret(model)
        self._log(events, "stru_interp", canonical_key(model), structure.to_json())
        return structure

    def evaluate_structure(self, reference: ModelingStructure, candidate: ModelingStructure,
                           model: OptimizationModel | None, events: EventLog) -> Verdict:
        diff = structure_diff(reference, candidate)
        verdict = Verdict(1, "") if diff.identical else Verdict(0, diff.render())
        self._log(events, "stru_eval", reference.to_json() + candidate.to_json(), verdict.comment or "Yes")
        return verdict

    def interpret_solution(self, solution: Solution, problem: ProblemInstance, context: SolutionContext,
                           events: EventLog) -> SolutionNarrative:
        if not solution.has_point:
            raise ValueError(f"cannot interpret a solution with status {solution.status}")
        text = f"The model of {problem.id} was solved.\n" + solution_text(solution)
        self._log(events, "sol_interp", context.solutions, text)
        return SolutionNarrative(text)

    def evaluate_solution(self, problem: ProblemInstance, narrative: SolutionNarrative, context: SolutionContext,
                          events: EventLog) -> Verdict:
        verdict = Verdict(1, "") if context.feasible else Verdict(0, context.feasibility or "infeasible solution")
        self._log(events, "sol_eval", narrative.text + context.feasibility, verdict.comment or "Yes")
        return verdict

    def refine(self, problem: ProblemInstance, structure: ModelingStructure, model: OptimizationModel, comment: str,
               context: RefineContext, step: int, events: EventLog) -> OptimizationModel:
        if not comment.strip():
            raise ValueError("refinement needs a non-empty comment")
        worked = self._lookup(problem.description)
        refined = replace(worked if worked is not None else model, provenance=Provenance("refined", step=step))
        self._log(events, "refine", comment, json.dumps(canonical_key(refined)), context.kind)
        return refined
