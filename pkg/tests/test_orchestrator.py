import json
import random
import sys

import pytest

from conftest import FIXTURES
from optverifier.agents import LLMAgents, MockAgents, Verdict
from optverifier.agents.library import worked_model
from optverifier.compile import SolverConfig, check_feasibility, ground
from optverifier.errors import ConfigError
from optverifier.events import LLM_STAGES, EventLog
from optverifier.evalbench.perturb import op_drop_constraint
from optverifier.gateway import Cassette, Gateway, ReplayBackend, SequenceBackend
from optverifier.model_ir import Constraint, ProblemInstance
from optverifier.orchestrator import (
    ModelVersion,
    PipelineConfig,
    RunRecord,
    pipeline_config_from,
    read_config_file,
    render_run_report,
    run_many,
    run_pipeline,
    verify_and_refine,
)

CASSETTES = FIXTURES / "cassettes"


class TrustingStructure(MockAgents):
    """Structure evaluator that always agrees, so only the solution side can object."""

    def evaluate_structure(self, reference, candidate, model, log):
        self._log(log, "stru_eval", candidate.to_json(), "Yes")
        return Verdict(1)


class YesMan(TrustingStructure):
    def evaluate_solution(self, problem, narrative, context, log):
        self._log(log, "sol_eval", narrative.text, "Yes")
        return Verdict(1)


def replay(name):
    return LLMAgents(Gateway(ReplayBackend(Cassette.load(CASSETTES / name))))


def fast(**kw):
    return PipelineConfig(solver=SolverConfig.named("highs-inprocess"), **kw)


def check_invariants(rec: RunRecord, config: PipelineConfig):
    llm = [e for e in rec.events if e.stage in LLM_STAGES]
    assert rec.totals.agent_calls == len(llm)
    assert rec.totals.prompt_tokens == sum(e.prompt_tokens for e in rec.events)
    assert rec.totals.completion_tokens == sum(e.completion_tokens for e in rec.events)
    assert [e.seq for e in rec.events] == list(range(len(rec.events)))
    starts = [e.started_at for e in rec.events]
    assert starts == sorted(starts)
    assert rec.refinements <= config.max_total_refinements
    assert rec.refinements == len(rec.models) - 1
    for version in rec.models[1:]:
        assert version.comment.strip() and version.trigger in ("structure", "solution", "check")
    if rec.outcome == "accepted":
        assert rec.feasibility is not None and rec.feasibility.feasible
        assert rec.structure_verdict.score == 1 and rec.solution_verdict.score == 1


# ----------------------------------------------------------------- mock runs

def test_mock_knapsack_happy_path(problems):
    config = fast()
    rec = run_pipeline(problems["knapsack"], MockAgents(), config)
    assert rec.outcome == "accepted" and rec.refinements == 0
    assert rec.objective_value == pytest.approx(48)
    assert [e.stage for e in rec.events if e.kind == "llm"] == [
        "distill", "formulate", "formulate", "stru_interp", "stru_eval", "sol_interp", "sol_eval"]
    assert [e.stage for e in rec.events if e.kind == "step"] == ["compile", "solve"]
    check_invariants(rec, config)


@pytest.mark.parametrize("name,value", [("fishery", 3000), ("tsp", 159), ("maxflow", 19)])
def test_mock_runs(problems, name, value):
    rec = run_pipeline(problems[name], MockAgents(), fast())
    assert rec.outcome == "accepted"
    assert rec.objective_value == pytest.approx(value, abs=1e-6)


def test_externally_supplied_fishery(problems, fishery):
    rec = verify_and_refine(problems["fishery"], fishery, MockAgents(), fast())
    assert rec.outcome == "accepted" and rec.objective_value == pytest.approx(3000)
    assert str(rec.models[0].model.provenance) == "externally_supplied"
    assert "formulate" not in [e.stage for e in rec.events]


def test_dropped_budget_goes_unbounded(problems, fishery):
    no_budget = fishery.__class__(
        fishery.parameters, fishery.variables,
        tuple(c for c in fishery.constraints if c.name != "Budget Constraint"), fishery.objective)
    config = fast()
    rec = verify_and_refine(problems["fishery"], no_budget, TrustingStructure(), config)
    solves = [e.detail for e in rec.events if e.stage == "solve"]
    assert solves == ["unbounded", "optimal"]
    assert rec.models[1].trigger == "check" and "unbounded" in rec.models[1].comment
    assert rec.outcome == "accepted" and rec.objective_value == pytest.approx(3000)
    check_invariants(rec, config)


def test_invalid_initial_model(problems, fishery):
    broken = fishery.__class__(fishery.parameters, fishery.variables,
                               fishery.constraints + (Constraint("Bad", "", "NumberOfTruckTrips <= Foo"),),
                               fishery.objective)
    with pytest.raises(ValueError):
        verify_and_refine(problems["fishery"], broken, MockAgents())


def test_structure_rejection_refines(problems, knapsack):
    dropped = op_drop_constraint(knapsack, random.Random(0))
    config = fast()
    rec = verify_and_refine(problems["knapsack"], dropped, MockAgents(), config)
    assert rec.outcome == "accepted" and rec.refinements == 1
    assert rec.models[1].trigger == "structure"
    assert "Missing from the model" in rec.models[1].comment
    check_invariants(rec, config)


def test_zero_budgets_exhaust(problems, maxflow):
    config = fast(max_structure_rounds=0, max_solution_rounds=0, max_total_refinements=0, max_compile_retries=0)
    rec = verify_and_refine(problems["maxflow"], worked_model("maxflow_missing_conservation"), MockAgents(), config)
    assert rec.outcome == "budget_exhausted"
    assert [e.stage for e in rec.events] == ["distill", "stru_interp", "stru_eval"]
    assert rec.structure_verdict.score == 0 and rec.solution is None
    check_invariants(rec, config)


def test_total_budget_caps_refinements(problems, knapsack):
    dropped = op_drop_constraint(knapsack, random.Random(0))
    config = fast(max_total_refinements=0)
    rec = verify_and_refine(problems["knapsack"], dropped, MockAgents(), config)
    assert rec.outcome == "budget_exhausted" and rec.refinements == 0


def test_feasibility_gate_overrides_yes(problems, knapsack):
    # a "solver" that always reports an overweight point
    script = ("import json, sys; json.dump({'status': 'feasible', 'values': "
              "{'ItemQuantities_0': 9}}, open(sys.argv[2], 'w'))")
    solver = SolverConfig("external", (sys.executable, "-c", script, "{lp}", "{sol}"))
    config = PipelineConfig(solver=solver)
    rec = verify_and_refine(problems["knapsack"], knapsack, YesMan(), config)
    assert rec.outcome == "budget_exhausted"
    assert rec.solution_verdict.score == 0
    assert rec.solution_verdict.anomaly == "accepted an infeasible solution"
    assert not rec.feasibility.feasible
    assert rec.refinements == config.max_solution_rounds
    check_invariants(rec, config)


def test_compile_error_triggers_check_refinement(problems):
    param = worked_model("warehouse_parameterized")
    config = fast()
    rec = verify_and_refine(problems["warehouse"], param, TrustingStructure(), config)
    compiles = [e.detail for e in rec.events if e.stage == "compile"]
    assert compiles[0] == "error"
    assert rec.models[1].trigger == "check" and "UNBOUND_PARAMETER" in rec.models[1].comment
    assert rec.outcome == "accepted" and rec.objective_value == pytest.approx(88241)


def test_compile_retries_exhausted(problems):
    config = fast(max_compile_retries=0)
    rec = verify_and_refine(problems["warehouse"], worked_model("warehouse_parameterized"), TrustingStructure(), config)
    assert rec.outcome == "budget_exhausted"
    assert "UNBOUND_PARAMETER" in rec.error


def test_toy_instantiation(problems):
    config = fast(toy_instantiation=True, toy_seed=5)
    rec = verify_and_refine(problems["warehouse"], worked_model("warehouse_parameterized"), TrustingStructure(), config)
    assert rec.outcome == "accepted" and rec.refinements == 0
    assert [e.detail for e in rec.events if e.stage == "compile"] == ["110 variables, 32 rows"]  # 10 demand, 10 capacity, 10 minimum, 2 count rows
    assert len(rec.solution.assignment) == 10 * 10 + 10


def test_data_paths_bind_external_parameters(problems):
    data = FIXTURES / "data"
    paths = tuple(str(data / n) for n in ("customers.csv", "warehouses.csv", "costs.json"))
    rec = verify_and_refine(problems["warehouse"], worked_model("warehouse_parameterized"), TrustingStructure(),
                            fast(data_paths=paths))
    assert rec.outcome == "accepted" and rec.objective_value == pytest.approx(88241)


def test_strict_reverify_reruns_structure(problems, fishery):
    class NoThenYes(TrustingStructure):
        def __init__(self):
            super().__init__()
            self.said_no = False

        def evaluate_solution(self, problem, narrative, context, log):
            if not self.said_no:
                self.said_no = True
                self._log(log, "sol_eval", narrative.text, "No")
                return Verdict(0, "No, check the trips.")
            return super().evaluate_solution(problem, narrative, context, log)

    for strict, expected in ((False, 1), (True, 2)):
        rec = verify_and_refine(problems["fishery"], fishery, NoThenYes(), fast(strict_reverify=strict))
        assert rec.outcome == "accepted"
        assert [e.stage for e in rec.events].count("stru_eval") == expected
        assert rec.models[1].no_change


def test_agent_failure_is_recorded(problems):
    problem = ProblemInstance("nurses", "Assign nurses to shifts at minimum cost.")
    rec = run_pipeline(problem, MockAgents(), fast())
    assert rec.outcome == "failed" and "AGENT_OUTPUT_INVALID" in rec.error


def test_run_many_keeps_order(problems):
    ids = ["tsp", "knapsack", "fishery", "maxflow"]
    records = run_many([problems[i] for i in ids], MockAgents(), fast(), jobs=3)
    assert [r.instance_id for r in records] == ids
    assert all(r.outcome == "accepted" for r in records)


# ----------------------------------------------------------- replayed runs

def test_maxflow_dual_loop_cassette(problems):
    config = PipelineConfig()
    rec = run_pipeline(problems["maxflow"], replay("maxflow_dual_loop.jsonl"), config)
    assert rec.outcome == "accepted"
    assert rec.refinements == 1 and rec.models[1].trigger == "structure"
    assert "flow balance" in rec.models[1].comment
    assert rec.objective_value == pytest.approx(19)
    g = ground(rec.final_model)
    conservation = g.rows_of("FlowConservation")
    assert len(conservation) == 7  # one per intermediate reservoir
    x = rec.solution.assignment
    for k in range(1, 8):
        inflow = sum(x[f"x[{i},{k}]"] for i in range(9))
        outflow = sum(x[f"x[{k},{j}]"] for j in range(9))
        assert inflow == pytest.approx(outflow, abs=1e-6)
    assert check_feasibility(g, rec.solution).feasible
    check_invariants(rec, config)


def test_formulate_reask_cassette(problems):
    rec = run_pipeline(problems["knapsack"], replay("formulate_reask.jsonl"))
    assert rec.outcome == "accepted" and rec.objective_value == pytest.approx(48)
    formulate = [e.detail for e in rec.events if e.stage == "formulate"]
    assert formulate == ["parameters", "model", "model re-ask"]


def test_replay_is_deterministic(problems):
    a = run_pipeline(problems["maxflow"], replay("maxflow_dual_loop.jsonl"))
    b = run_pipeline(problems["maxflow"], replay("maxflow_dual_loop.jsonl"))
    assert json.dumps(a.to_json(include_time=False)) == json.dumps(b.to_json(include_time=False))


def test_budget_exhausted_after_formulate_and_one_eval(problems):
    lines = [json.loads(l) for l in (CASSETTES / "maxflow_dual_loop.jsonl").read_text().splitlines()]
    replies = [d["response"]["content"] for d in lines if "fp" in d][:5]
    agents = LLMAgents(Gateway(SequenceBackend(replies)))
    config = PipelineConfig(max_structure_rounds=0, max_solution_rounds=0, max_total_refinements=0,
                            max_compile_retries=0)
    rec = run_pipeline(problems["maxflow"], agents, config)
    assert rec.outcome == "budget_exhausted"
    assert [e.stage for e in rec.events] == ["distill", "formulate", "formulate", "stru_interp", "stru_eval"]


# ------------------------------------------------------------------ report

def test_empty_report():
    assert render_run_report(RunRecord("x")) == "Run report: x\nOutcome: failed\n"


def test_accepted_report(problems):
    text = render_run_report(run_pipeline(problems["knapsack"], MockAgents(), fast()))
    assert "Refinements: 0" in text and "Refinement 1" not in text
    assert "objective 48" in text
    for stage in ("distill", "formulate", "sol_eval", "compile", "solve"):
        assert f"\n{stage} " in text


def test_two_refinement_report(knapsack):
    first = op_drop_constraint(knapsack, random.Random(0))
    second = op_drop_constraint(first, random.Random(1))
    log = EventLog()
    log.step("compile", 0.0, 0.1, "lp", "ok")
    rec = RunRecord("k", log.events, refinements=2, outcome="accepted",
                    models=[ModelVersion(0, second), ModelVersion(1, first, "structure", "add a row"),
                            ModelVersion(2, knapsack, "solution", "add the last row")])
    text = render_run_report(rec)
    assert text.count("--- before") == 2
    assert "Refinement 1 (structure)" in text and "Refinement 2 (solution)" in text


def test_record_json_round(problems):
    rec = run_pipeline(problems["knapsack"], MockAgents(), fast())
    doc = json.loads(json.dumps(rec.to_json()))
    assert doc["outcome"] == "accepted" and doc["totals"]["agent_calls"] == 7
    assert "wall_time" not in json.dumps(rec.to_json(include_time=False))


# ------------------------------------------------------------------ config

def test_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# budgets\nmax_structure_rounds = 3\nstrict_reverify = yes\n"
                    "data_paths = a.csv, b.json\nsolver = cbc  # ignored here\n")
    cfg = pipeline_config_from(read_config_file(path))
    assert cfg.max_structure_rounds == 3 and cfg.strict_reverify
    assert cfg.data_paths == ("a.csv", "b.json")
    assert cfg.max_solution_rounds == 2


@pytest.mark.parametrize("text", ["max_structure_rounds = -1\n", "max_solution_rounds = two\n", "just words\n"])
def test_bad_config(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError):
        pipeline_config_from(read_config_file(path))
