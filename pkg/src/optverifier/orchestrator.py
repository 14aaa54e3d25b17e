"""Pipeline state machine: distill, formulate, verify from both sides, refine, accept.

A run never raises for agent, gateway or solver trouble; the error lands in the
returned :class:`RunRecord` with outcome ``failed``.
"""

from __future__ import annotations

import difflib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .agents.base import Agents, RefineContext, SolutionContext, Verdict, formulation_text, solution_text
from .compile import FeasibilityReport, Solution, SolverConfig, check_feasibility, emit_lp, ground, solve
from .compile.grounding import GroundedModel
from .compile.toy import instantiate_toy, load_external_parameters
from .errors import CompileError, ConfigError, DataBindingError, DslError, OptVerifierError
from .events import LLM_STAGES, Event, EventLog
from .model_ir import (
    OptimizationModel,
    ProblemInstance,
    Provenance,
    canonical_key,
    model_to_dict,
    serialize_model,
    validate_model,
)
from .structure import ModelingStructure

OUTCOMES = ("accepted", "budget_exhausted", "failed")


@dataclass(frozen=True)
class PipelineConfig:
    max_structure_rounds: int = 2
    max_solution_rounds: int = 2
    max_total_refinements: int = 6
    max_compile_retries: int = 2
    prompt_set: str = "dsl"
    solver: SolverConfig = field(default_factory=SolverConfig)
    toy_instantiation: bool = False
    toy_seed: int = 0
    data_paths: tuple[str, ...] = ()
    strict_reverify: bool = False

    def __post_init__(self):
        for name in ("max_structure_rounds", "max_solution_rounds", "max_total_refinements", "max_compile_retries"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


# ------------------------------------------------------------- config files

_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key] = value
    return out


def coerce(key: str, value: str, kind: type):
    try:
        if kind is bool:
            return _BOOL[value.strip().lower()]
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
    except (KeyError, ValueError):
        raise ConfigError(f"{key}: cannot read {value!r} as {kind.__name__}") from None
    return value


PIPELINE_KEYS = {
    "max_structure_rounds": int,
    "max_solution_rounds": int,
    "max_total_refinements": int,
    "max_compile_retries": int,
    "prompt_set": str,
    "toy_instantiation": bool,
    "toy_seed": int,
    "strict_reverify": bool,
}


def pipeline_config_from(values: dict[str, str], solver: SolverConfig | None = None) -> PipelineConfig:
    """Build a config from string values; keys outside :data:`PIPELINE_KEYS` (plus ``data_paths``) are ignored."""
    kw = {k: coerce(k, values[k], t) for k, t in PIPELINE_KEYS.items() if k in values}
    if values.get("data_paths"):
        kw["data_paths"] = tuple(p.strip() for p in values["data_paths"].split(",") if p.strip())
    if solver is not None:
        kw["solver"] = solver
    return PipelineConfig(**kw)


# ------------------------------------------------------------- run record


@dataclass(frozen=True)
class ModelVersion:
    """One model in the run; refined versions cite the comment that triggered them."""

    index: int
    model: OptimizationModel
    trigger: str = ""  # "" for the initial model, else structure | solution | check
    comment: str = ""
    no_change: bool = False

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "provenance": self.model.provenance.to_json(),
            "trigger": self.trigger,
            "comment": self.comment,
            "no_change": self.no_change,
            "model": model_to_dict(self.model, include_provenance=False),
        }


@dataclass(frozen=True)
class Totals:
    agent_calls: int
    prompt_tokens: int
    completion_tokens: int
    wall_time: float

    @property
    def tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


def totals_of(events: Sequence[Event], wall_time: float = 0.0) -> Totals:
    llm = [e for e in events if e.kind == "llm"]
    return Totals(len(llm), sum(e.prompt_tokens for e in llm), sum(e.completion_tokens for e in llm), wall_time)


@dataclass
class RunRecord:
    instance_id: str
    events: list[Event] = field(default_factory=list)
    structure: ModelingStructure | None = None
    models: list[ModelVersion] = field(default_factory=list)
    solution: Solution | None = None
    feasibility: FeasibilityReport | None = None
    structure_verdict: Verdict | None = None
    solution_verdict: Verdict | None = None
    outcome: str = "failed"
    error: str = ""
    refinements: int = 0
    wall_time: float = 0.0

    @property
    def final_model(self) -> OptimizationModel | None:
        return self.models[-1].model if self.models else None

    @property
    def totals(self) -> Totals:
        return totals_of(self.events, self.wall_time)

    @property
    def objective_value(self) -> float | None:
        return self.solution.objective_value if self.solution is not None else None

    def to_json(self, include_time: bool = True) -> dict:
        t = self.totals
        totals = {"agent_calls": t.agent_calls, "prompt_tokens": t.prompt_tokens,
                  "completion_tokens": t.completion_tokens, "tokens": t.tokens}
        if include_time:
            totals["wall_time"] = t.wall_time
        return {
            "instance_id": self.instance_id,
            "outcome": self.outcome,
            "error": self.error,
            "refinements": self.refinements,
            "structure": self.structure.to_dict() if self.structure else None,
            "models": [m.to_json() for m in self.models],
            "solution": self.solution.to_json(include_time) if self.solution else None,
            "feasibility": self.feasibility.to_json() if self.feasibility else None,
            "structure_verdict": self.structure_verdict.to_json() if self.structure_verdict else None,
            "solution_verdict": self.solution_verdict.to_json() if self.solution_verdict else None,
            "totals": totals,
            "events": [e.to_json(include_time) for e in self.events],
        }


# ------------------------------------------------------------- the pipeline


class _Exhausted(Exception):
    """A loop ran out of budget; the record keeps the last verdicts."""


class _Run:
    def __init__(self, problem: ProblemInstance, agents: Agents, config: PipelineConfig, events: EventLog):
        self.problem = problem
        self.agents = agents
        self.config = config
        self.events = events
        self.record = RunRecord(problem.id, events.events)
        self.compile_retries = 0
        self.solution_rounds = 0

    @property
    def model(self) -> OptimizationModel:
        return self.record.models[-1].model

    def _add_model(self, model: OptimizationModel, trigger: str = "", comment: str = "") -> None:
        previous = self.record.models[-1].model if self.record.models else None
        no_change = previous is not None and canonical_key(previous) == canonical_key(model)
        self.record.models.append(ModelVersion(len(self.record.models), model, trigger, comment, no_change))

    def _can_refine(self) -> bool:
        return self.record.refinements < self.config.max_total_refinements

    def _refine(self, comment: str, context: RefineContext) -> None:
        self.record.refinements += 1
        refined = self.agents.refine(
            self.problem, self.record.structure, self.model, comment, context, self.record.refinements, self.events
        )
        self._add_model(refined, context.kind, comment)

    # structure side ------------------------------------------------------

    def structure_loop(self, rounds_left: int) -> bool:
        """Interpret and evaluate; refine on rejection while budget remains. True iff accepted."""
        while True:
            interpreted = self.agents.interpret_structure(self.model, self.events)
            verdict = self.agents.evaluate_structure(self.record.structure, interpreted, self.model, self.events)
            self.record.structure_verdict = verdict
            if verdict.score == 1:
                return True
            if rounds_left <= 0 or not self._can_refine():
                return False
            rounds_left -= 1
            self._refine(verdict.comment, RefineContext("structure", interpreted=interpreted))

    # compile / solve -----------------------------------------------------

    def _bindings(self, model: OptimizationModel) -> tuple[OptimizationModel, dict]:
        if not model.has_external_parameters():
            return model, {}
        bindings: dict = {}
        sources = {Path(p.value.source).name for p in model.parameters if p.is_external}
        for path in self.config.data_paths:
            if Path(path).name in sources:
                bindings = load_external_parameters(model, path, bindings)
        unbound = [p.symbol for p in model.parameters if p.is_external and p.symbol not in bindings]
        if unbound and self.config.toy_instantiation:
            return instantiate_toy(model, self.config.toy_seed)
        return model, bindings

    def compile(self) -> GroundedModel:
        """Ground the current model; compile errors trigger check refinements within budget."""
        while True:
            started = self.events.now()
            t0 = time.perf_counter()
            try:
                model, bindings = self._bindings(self.model)
                grounded = ground(model, bindings)
                lp = emit_lp(grounded)
            except (CompileError, DslError, DataBindingError) as exc:
                self.events.step("compile", started, time.perf_counter() - t0, str(exc), "error")
                comment = f"The model could not be compiled into a solvable program. {exc}"
                if self.compile_retries >= self.config.max_compile_retries or not self._can_refine():
                    self.record.error = str(exc)
                    raise _Exhausted from None
                self.compile_retries += 1
                self._refine(comment, RefineContext("check"))
                continue
            detail = f"{len(grounded.variables)} variables, {len(grounded.rows)} rows"
            self.events.step("compile", started, time.perf_counter() - t0, lp, detail)
            return grounded

    def solve(self, grounded: GroundedModel) -> Solution:
        started = self.events.now()
        t0 = time.perf_counter()
        solution = solve(grounded, self.config.solver)
        payload = json.dumps(solution.to_json(include_time=False), sort_keys=True)
        self.events.step("solve", started, time.perf_counter() - t0, payload, solution.status)
        return solution

    # solution side -------------------------------------------------------

    def solution_loop(self) -> bool:
        while True:
            grounded = self.compile()
            solution = self.solve(grounded)
            self.record.solution = solution
            if solution.status == "error":
                raise OptVerifierError(f"solver failed: {solution.message}", "SOLVER_ERROR")
            if not solution.has_point:
                self.record.feasibility = None
                self.record.solution_verdict = None
                comment = (f"Solving the model reported status '{solution.status}'. "
                           "Check the constraints, bounds and objective for missing or wrong rows.")
                self._solution_refinement(comment, RefineContext("check"))
                continue
            report = check_feasibility(grounded, solution)
            self.record.feasibility = report
            context = SolutionContext(
                self.record.structure.problem_type, solution_text(solution), formulation_text(self.model),
                report.render(), report.feasible,
            )
            narrative = self.agents.interpret_solution(solution, self.problem, context, self.events)
            verdict = self.agents.evaluate_solution(self.problem, narrative, context, self.events)
            if verdict.score == 1 and not report.feasible:
                verdict = Verdict(0, report.render(), "accepted an infeasible solution")
            self.record.solution_verdict = verdict
            if verdict.score == 1:
                return True
            self._solution_refinement(
                verdict.comment, RefineContext("solution", solution=context, narrative=narrative.text)
            )
            if self.config.strict_reverify and not self.structure_loop(self.config.max_structure_rounds):
                raise _Exhausted

    def _solution_refinement(self, comment: str, context: RefineContext) -> None:
        if self.solution_rounds >= self.config.max_solution_rounds or not self._can_refine():
            raise _Exhausted
        self.solution_rounds += 1
        self._refine(comment, context)

    # entry ---------------------------------------------------------------

    def run(self, initial: OptimizationModel | None) -> RunRecord:
        self.record.structure = self.agents.distill(self.problem, self.events)
        if initial is None:
            initial = self.agents.formulate(self.problem, self.record.structure, self.events)
        self._add_model(initial)
        if not self.structure_loop(self.config.max_structure_rounds):
            raise _Exhausted
        self.solution_loop()
        self.record.outcome = "accepted"
        return self.record


def _execute(problem: ProblemInstance, agents: Agents, config: PipelineConfig,
             initial: OptimizationModel | None, clock: Callable[[], float] | None) -> RunRecord:
    events = EventLog(clock=clock) if clock is not None else EventLog()
    run = _Run(problem, agents, config, events)
    t0 = time.perf_counter()
    try:
        run.run(initial)
    except _Exhausted:
        run.record.outcome = "budget_exhausted"
    except (OptVerifierError, ValueError) as exc:
        run.record.outcome = "failed"
        run.record.error = str(exc)
    run.record.wall_time = time.perf_counter() - t0
    return run.record


def run_pipeline(problem: ProblemInstance, agents: Agents, config: PipelineConfig | None = None,
                 clock: Callable[[], float] | None = None) -> RunRecord:
    """Full pipeline from the description."""
    return _execute(problem, agents, config or PipelineConfig(), None, clock)


def verify_and_refine(problem: ProblemInstance, model: OptimizationModel, agents: Agents,
                      config: PipelineConfig | None = None, clock: Callable[[], float] | None = None) -> RunRecord:
    """Verification and refinement of a model produced elsewhere; formulate is skipped."""
    report = validate_model(model)
    if not report.valid:
        raise ValueError("initial model is invalid:\n" + report.render())
    model = replace(model, provenance=Provenance("externally_supplied"))
    return _execute(problem, agents, config or PipelineConfig(), model, clock)


def run_many(problems: Iterable[ProblemInstance], agents: Agents, config: PipelineConfig | None = None,
             jobs: int = 1, initial_models: dict[str, OptimizationModel] | None = None) -> list[RunRecord]:
    """Run independent pipelines on a bounded pool; records come back in input order."""
    config = config or PipelineConfig()
    initial_models = initial_models or {}

    def one(problem: ProblemInstance) -> RunRecord:
        if problem.id in initial_models:
            return verify_and_refine(problem, initial_models[problem.id], agents, config)
        return run_pipeline(problem, agents, config)

    problems = list(problems)
    if jobs <= 1:
        return [one(p) for p in problems]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, problems))


# ------------------------------------------------------------- report


def stage_breakdown(events: Sequence[Event]) -> dict[str, tuple[int, int, float]]:
    """stage -> (calls, tokens, seconds), in pipeline order."""
    order = LLM_STAGES + ("compile", "solve")
    out: dict[str, list] = {}
    for e in events:
        row = out.setdefault(e.stage, [0, 0, 0.0])
        row[0] += 1
        row[1] += e.tokens
        row[2] += e.duration
    return {s: tuple(out[s]) for s in order if s in out}


def _model_diff(a: OptimizationModel, b: OptimizationModel) -> list[str]:
    left = serialize_model(a, include_provenance=False).splitlines()
    right = serialize_model(b, include_provenance=False).splitlines()
    return list(difflib.unified_diff(left, right, "before", "after", lineterm="", n=1))


def render_run_report(record: RunRecord) -> str:
    lines = [f"Run report: {record.instance_id}", f"Outcome: {record.outcome}"]
    if not record.events and not record.models:
        return "\n".join(lines) + "\n"
    if record.error:
        lines.append(f"Error: {record.error}")
    t = record.totals
    lines.append(f"Refinements: {record.refinements}")
    lines.append(f"Agent calls: {t.agent_calls}   Tokens: {t.tokens}   Wall time: {t.wall_time:.2f}s")
    lines += ["", "Stage        calls    tokens   seconds"]
    for stage, (calls, tokens, seconds) in stage_breakdown(record.events).items():
        lines.append(f"{stage:<12} {calls:>5} {tokens:>9} {seconds:>9.3f}")
    for version in record.models[1:]:
        previous = record.models[version.index - 1].model
        lines += ["", f"Refinement {version.index} ({version.trigger})", f"Comment: {version.comment.strip()}"]
        if version.no_change:
            lines.append("(the refined model is identical to the previous one)")
        else:
            lines += _model_diff(previous, version.model)
    lines.append("")
    if record.solution is not None:
        s = record.solution
        obj = "n/a" if s.objective_value is None else format(s.objective_value, ".10g")
        lines.append(f"Solution: status {s.status}, objective {obj} ({s.solver_id})")
    if record.feasibility is not None:
        lines.append("Feasibility: " + ("feasible" if record.feasibility.feasible else "VIOLATED"))
    for label, verdict in (("Structure verdict", record.structure_verdict), ("Solution verdict", record.solution_verdict)):
        if verdict is not None:
            text = "yes" if verdict.score == 1 else "no: " + verdict.comment.strip().splitlines()[0]
            lines.append(f"{label}: {text}")
    return "\n".join(lines) + "\n"


__all__ = [
    "PipelineConfig", "RunRecord", "ModelVersion", "Totals", "run_pipeline", "verify_and_refine", "run_many",
    "render_run_report", "read_config_file", "pipeline_config_from", "stage_breakdown", "OUTCOMES",
]
