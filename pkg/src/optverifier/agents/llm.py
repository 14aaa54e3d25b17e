"""Agents backed by chat completions through the gateway."""

from __future__ import annotations

import time
from dataclasses import replace
from typing import Callable, TypeVar

from ..compile.solvers import Solution
from ..errors import AgentError, JsonExtractionError, ModelFormatError
from ..events import EventLog
from ..gateway import Gateway, Message, extract_json_block, fingerprint
from ..model_ir import (
    OptimizationModel,
    ProblemInstance,
    Provenance,
    model_from_dict,
    model_to_dict,
    validate_model,
)
from ..structure import ModelingStructure, structure_from_dict
from . import library
from .base import (
    RefineContext,
    SolutionContext,
    SolutionNarrative,
    Verdict,
    model_json,
    parameters_text,
    score_reply,
)
from .prompts import reask_message, template

T = TypeVar("T")


class _Unusable(Exception):
    """Reply could not be turned into the expected artifact; message is shown to the model on re-ask."""


class LLMAgents:
    def __init__(self, gateway: Gateway, prompt_set: str = "dsl"):
        self.gateway = gateway
        self.prompt_set = prompt_set

    # ----------------------------------------------------------- plumbing

    def _call(self, stage: str, messages: list[Message], events: EventLog, detail: str = "") -> str:
        request = self.gateway.request(messages)
        started = events.now()
        t0 = time.perf_counter()
        response = self.gateway.complete(request)
        events.llm(
            stage, started, time.perf_counter() - t0, response.prompt_tokens, response.completion_tokens,
            response.estimated, fingerprint(request), response.content, detail,
        )
        return response.content

    def _with_reask(self, stage: str, messages: list[Message], events: EventLog,
                    parse: Callable[[str], T], detail: str = "") -> tuple[T, str]:
        reply = self._call(stage, messages, events, detail)
        try:
            return parse(reply), reply
        except _Unusable as exc:
            problem = str(exc)
        retry = [*messages, Message("assistant", reply), reask_message(self.prompt_set, problem)]
        reply = self._call(stage, retry, events, (detail + " re-ask").strip())
        try:
            return parse(reply), reply
        except _Unusable as exc:
            raise AgentError(f"{stage}: unusable reply after one re-ask: {exc}") from None

    @staticmethod
    def _json(reply: str):
        try:
            return extract_json_block(reply)
        except JsonExtractionError:
            raise _Unusable("no JSON block could be parsed from the reply") from None

    def _structure_parser(self, provenance: str) -> Callable[[str], ModelingStructure]:
        def parse(reply: str) -> ModelingStructure:
            doc = self._json(reply)
            try:
                return structure_from_dict(doc, provenance)
            except (ModelFormatError, ValueError) as exc:
                raise _Unusable(str(exc)) from None

        return parse

    def _model_parser(self, provenance: Provenance, fallback_parameters=None) -> Callable[[str], OptimizationModel]:
        def parse(reply: str) -> OptimizationModel:
            doc = self._json(reply)
            if isinstance(doc, dict) and "parameters" not in doc and fallback_parameters is not None:
                doc = dict(doc, parameters=fallback_parameters)
            try:
                model = model_from_dict(doc)
            except (ModelFormatError, ValueError, TypeError) as exc:
                raise _Unusable(str(exc)) from None
            model = replace(model, provenance=provenance)
            report = validate_model(model)
            if not report.valid:
                raise _Unusable("the model is invalid:\n" + report.render())
            return model

        return parse

    # ------------------------------------------------------------- agents

    def distill(self, problem: ProblemInstance, events: EventLog) -> ModelingStructure:
        messages = template(self.prompt_set, "distill").render(
            problem=problem.description, base_formulation=library.base_formulation(problem.description)
        )
        structure, _ = self._with_reask(
            "distill", messages, events, self._structure_parser("distilled_from_description")
        )
        return structure

    def formulate(self, problem: ProblemInstance, structure: ModelingStructure, events: EventLog) -> OptimizationModel:
        params_messages = template(self.prompt_set, "formulate_params").render(problem=problem.description)

        def parse_params(reply: str):
            doc = self._json(reply)
            params = doc.get("parameters") if isinstance(doc, dict) else doc
            if not isinstance(params, list):
                raise _Unusable("expected a JSON object with a 'parameters' array")
            return params

        params, params_reply = self._with_reask("formulate", params_messages, events, parse_params, "parameters")
        base = library.base_formulation(f"{structure.problem_type} {structure.specific_type} {problem.description}")
        messages = template(self.prompt_set, "formulate_model").render(
            problem=problem.description,
            parameters_reply=params_reply,
            problem_type=structure.problem_type,
            structure=structure.to_json(),
            base_formulation=base,
        )
        model, _ = self._with_reask(
            "formulate", messages, events, self._model_parser(Provenance("llm_formulated"), params), "model"
        )
        return model

    def interpret_structure(self, model: OptimizationModel, events: EventLog) -> ModelingStructure:
        messages = template(self.prompt_set, "stru_interp").render(model=model_json(model))
        structure, _ = self._with_reask(
            "stru_interp", messages, events, self._structure_parser("interpreted_from_model")
        )
        return structure

    def _stru_eval_values(self, reference: ModelingStructure, candidate: ModelingStructure,
                          model: OptimizationModel) -> dict:
        return {
            "problem_type": reference.problem_type,
            "parameters": parameters_text(model),
            "formulation_interpretation": candidate.to_json(),
            "original_problem_interpretation": reference.to_json(),
        }

    def evaluate_structure(self, reference: ModelingStructure, candidate: ModelingStructure,
                           model: OptimizationModel, events: EventLog) -> Verdict:
        messages = template(self.prompt_set, "stru_eval").render(**self._stru_eval_values(reference, candidate, model))
        return score_reply(self._call("stru_eval", messages, events))

    @staticmethod
    def _sol_values(problem: ProblemInstance, context: SolutionContext) -> dict:
        return {
            "problem_type": context.problem_type,
            "solutions": context.solutions,
            "formulation_interpretation": context.formulation,
            "original_problem_interpretation": problem.description,
            "feasibility": context.feasibility,
        }

    def interpret_solution(self, solution: Solution, problem: ProblemInstance, context: SolutionContext,
                           events: EventLog) -> SolutionNarrative:
        if not solution.has_point:
            raise ValueError(f"cannot interpret a solution with status {solution.status}")
        messages = template(self.prompt_set, "sol_interp").render(**self._sol_values(problem, context))
        reply = self._call("sol_interp", messages, events)
        if not reply.strip():
            reply = "(the interpreter returned an empty reply)"
        return SolutionNarrative(reply)

    def evaluate_solution(self, problem: ProblemInstance, narrative: SolutionNarrative, context: SolutionContext,
                          events: EventLog) -> Verdict:
        messages = template(self.prompt_set, "sol_eval").render(
            narrative=narrative.text, **self._sol_values(problem, context)
        )
        return score_reply(self._call("sol_eval", messages, events))

    def refine(self, problem: ProblemInstance, structure: ModelingStructure, model: OptimizationModel, comment: str,
               context: RefineContext, step: int, events: EventLog) -> OptimizationModel:
        if not comment.strip():
            raise ValueError("refinement needs a non-empty comment")
        values = {"problem": problem.description, "model": model_json(model), "comment": comment}
        if context.kind == "structure":
            candidate = context.interpreted or structure
            values.update(self._stru_eval_values(structure, candidate, model))
            stage = "refine"
        elif context.kind == "solution":
            if context.solution is None:
                raise ValueError("solution-side refinement needs the solution context")
            values.update(self._sol_values(problem, context.solution), narrative=context.narrative)
            stage = "refine_solution"
        elif context.kind == "check":
            stage = "refine_check"
        else:
            raise ValueError(f"unknown refinement kind {context.kind!r}")
        messages = template(self.prompt_set, stage).render(**values)
        fallback = model_to_dict(model, include_provenance=False)["parameters"]
        parser = self._model_parser(Provenance("refined", step=step), fallback)
        refined, _ = self._with_reask("refine", messages, events, parser, context.kind)
        return refined

