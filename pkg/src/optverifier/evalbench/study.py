"""Verifier precision/recall on perturbed models.

The positive class of the metrics is "incorrect model": a sample is flagged
when an evaluator returns score 0, and only perturbed samples are incorrect.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field, replace

from ..agents.base import Agents, SolutionContext, formulation_text, solution_text
from ..agents.mock import mock_interpret
from ..compile import SolverConfig, check_feasibility, ground, solve
from ..errors import OptVerifierError
from ..events import EventLog
from ..model_ir import OptimizationModel, ProblemInstance
from ..structure import ModelingStructure
from .perturb import PerturbationSpec, perturb_model

SIDES = ("structure", "solution", "either")


@dataclass(frozen=True)
class StudyPositive:
    id: str
    difficulty: str
    model: OptimizationModel
    structure: ModelingStructure
    description: str = ""


def positives_from_models(items) -> list[StudyPositive]:
    """(id, difficulty, model) triples with the truth structure read off the model."""
    return [StudyPositive(i, d, m, mock_interpret(m, "distilled_from_description")) for i, d, m in items]


@dataclass(frozen=True)
class Sample:
    positive_id: str
    difficulty: str
    perturbed: bool
    op: str
    structure_flag: bool | None
    solution_flag: bool | None
    note: str = ""

    def flag(self, side: str) -> bool | None:
        if side == "structure":
            return self.structure_flag
        if side == "solution":
            return self.solution_flag
        flags = [f for f in (self.structure_flag, self.solution_flag) if f is not None]
        return any(flags) if flags else None


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    abstained: int = 0

    @property
    def precision(self) -> float | None:
        flagged = self.tp + self.fp
        return self.tp / flagged if flagged else None

    @property
    def recall(self) -> float | None:
        perturbed = self.tp + self.fn
        return self.tp / perturbed if perturbed else None


def confusion(samples, side: str) -> Confusion:
    tp = fp = fn = tn = ab = 0
    for s in samples:
        flag = s.flag(side)
        if flag is None:
            ab += 1
        elif s.perturbed:
            tp, fn = tp + flag, fn + (not flag)
        else:
            fp, tn = fp + flag, tn + (not flag)
    return Confusion(tp, fp, fn, tn, ab)


@dataclass
class StudyResult:
    samples: list[Sample] = field(default_factory=list)

    def strata(self) -> "OrderedDict[str, list[Sample]]":
        out: OrderedDict[str, list[Sample]] = OrderedDict()
        for s in self.samples:
            out.setdefault(s.difficulty, []).append(s)
        return out

    def metrics(self, side: str = "structure", ops: tuple[str, ...] | None = None) -> "OrderedDict[str, Confusion]":
        """Confusion per stratum (plus ``all``); ``ops`` restricts the negatives considered."""
        def keep(s: Sample) -> bool:
            return not s.perturbed or ops is None or s.op in ops

        out = OrderedDict((k, confusion([s for s in v if keep(s)], side)) for k, v in self.strata().items())
        out["all"] = confusion([s for s in self.samples if keep(s)], side)
        return out

    def to_json(self) -> dict:
        def cj(c: Confusion) -> dict:
            return {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn, "abstained": c.abstained,
                    "precision": c.precision, "recall": c.recall}

        return {
            "samples": len(self.samples),
            "per_stratum_samples": {k: len(v) for k, v in self.strata().items()},
            "metrics": {side: {k: cj(c) for k, c in self.metrics(side).items()} for side in SIDES},
        }

    def to_markdown(self) -> str:
        def pct(v):
            return "n/a" if v is None else f"{100 * v:.1f}"

        lines = ["# Verifier study", "", f"Samples: {len(self.samples)}", "",
                 "| Side | Stratum | Samples | TP | FP | FN | TN | Abstained | Precision (%) | Recall (%) |",
                 "|---|---|---|---|---|---|---|---|---|---|"]
        for side in SIDES:
            for stratum, c in self.metrics(side).items():
                n = c.tp + c.fp + c.fn + c.tn + c.abstained
                lines.append(f"| {side} | {stratum} | {n} | {c.tp} | {c.fp} | {c.fn} | {c.tn} | {c.abstained} "
                             f"| {pct(c.precision)} | {pct(c.recall)} |")
        return "\n".join(lines) + "\n"


def _solution_flag(problem: ProblemInstance, model: OptimizationModel, structure: ModelingStructure,
                   agents: Agents, solver: SolverConfig, events: EventLog) -> tuple[bool | None, str]:
    try:
        grounded = ground(model)
        solution = solve(grounded, solver)
    except OptVerifierError as exc:
        return None, str(exc)
    if solution.status in ("infeasible", "unbounded"):
        return True, solution.status
    if not solution.has_point:
        return None, solution.message or solution.status
    report = check_feasibility(grounded, solution)
    context = SolutionContext(structure.problem_type, solution_text(solution), formulation_text(model),
                              report.render(), report.feasible)
    narrative = agents.interpret_solution(solution, problem, context, events)
    verdict = agents.evaluate_solution(problem, narrative, context, events)
    return verdict.score == 0 or not report.feasible, ""


def verifier_study(positives: list[StudyPositive], spec: PerturbationSpec, agents: Agents,
                   solver: SolverConfig | None = None) -> StudyResult:
    """Evaluate each positive and its ``spec.k`` perturbations; ``solver=None`` skips the solution side."""
    result = StudyResult()
    for n, pos in enumerate(positives):
        # a distinct seed per positive, so equally shaped models do not all get the same ops
        negatives = perturb_model(pos.model, replace(spec, seed=spec.seed + n))
        problem = ProblemInstance(pos.id, pos.description or f"Optimization problem {pos.id}", difficulty=pos.difficulty)
        for model, perturbed in [(pos.model, False)] + [(m, True) for m in negatives]:
            events = EventLog()
            notes = []
            try:
                interpreted = agents.interpret_structure(model, events)
                verdict = agents.evaluate_structure(pos.structure, interpreted, model, events)
                structure_flag = verdict.score == 0
            except (OptVerifierError, ValueError) as exc:
                structure_flag = None
                notes.append(f"structure: {exc}")
            solution_flag = None
            if solver is not None:
                try:
                    solution_flag, note = _solution_flag(problem, model, pos.structure, agents, solver, events)
                except (OptVerifierError, ValueError) as exc:
                    solution_flag, note = None, str(exc)
                if note:
                    notes.append(f"solution: {note}")
            op = model.provenance.op if perturbed else ""
            result.samples.append(
                Sample(pos.id, pos.difficulty, perturbed, op or "", structure_flag, solution_flag, "; ".join(notes))
            )
    return result
