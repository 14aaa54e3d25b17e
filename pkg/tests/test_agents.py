import json
import random
import re
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from optverifier.agents import (
    LLMAgents,
    MockAgents,
    PROMPT_SETS,
    RefineContext,
    SolutionContext,
    SolutionNarrative,
    Verdict,
    first_token_is_yes,
    mock_interpret,
    score_reply,
    template,
)
from optverifier.agents.library import base_formulation, classify, worked_model
from optverifier.agents.prompts import STAGE_LAYOUT, TemplateError, fragment
from optverifier.compile import Solution
from optverifier.errors import AgentError
from optverifier.events import EventLog
from optverifier.evalbench.perturb import op_drop_constraint
from optverifier.gateway import Gateway, SequenceBackend
from optverifier.model_ir import Objective, OptimizationModel, ProblemInstance, model_to_dict
from optverifier.structure import ModelingStructure

ROOT = Path(__file__).parents[1]
TEMPLATES = ROOT / "src" / "optverifier" / "agents" / "templates"
INVENTED = {"check_comment", "feasibility_context", "model_format", "reask", "refine_context", "stru_interp"}


def fenced(doc) -> str:
    return "```json\n" + json.dumps(doc, indent=2) + "\n```"


def scripted(replies, prompt_set="dsl"):
    backend = SequenceBackend(replies)
    return LLMAgents(Gateway(backend), prompt_set), backend


# ------------------------------------------------------------ yes-token rule

@given(st.sampled_from(["Yes", "yes", "YES", "yes.", "Yes!", "yes,", "Yes:"]), st.text(max_size=40),
       st.sampled_from(["", " ", "\n", "\t  "]))
def test_yes_first_token_accepts(token, rest, lead):
    reply = lead + token + (" " + rest if rest else "")
    assert score_reply(reply) == Verdict(1, "")


@given(st.text(max_size=60))
def test_score_matches_first_token(reply):
    parts = reply.split()
    expected = bool(parts) and parts[0].rstrip("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~").lower() == "yes"
    verdict = score_reply(reply)
    assert verdict.score == int(expected)
    if not expected:
        assert verdict.comment.strip()


@pytest.mark.parametrize("reply", ["No", "Yesterday was fine", "The answer is yes", "yes-ish but not quite"])
def test_non_yes_replies(reply):
    v = score_reply(reply)
    assert v.score == 0 and v.comment == reply


def test_refusal_and_empty_are_anomalies():
    assert score_reply("I cannot evaluate this.").anomaly == "refusal"
    empty = score_reply("   ")
    assert empty.score == 0 and empty.anomaly == "empty reply"
    assert not first_token_is_yes("")


def test_verdict_invariants():
    with pytest.raises(ValueError):
        Verdict(2)
    with pytest.raises(ValueError):
        Verdict(0, "  ")
    with pytest.raises(ValueError):
        SolutionNarrative(" ")


# ---------------------------------------------------------------- templates

@pytest.mark.parametrize("prompt_set", PROMPT_SETS)
@pytest.mark.parametrize("stage", sorted(STAGE_LAYOUT))
def test_every_stage_renders(prompt_set, stage):
    t = template(prompt_set, stage)
    values = {name: f"<{name}>" for name in t.placeholders()}
    messages = t.render(**values)
    assert [m.role for m in messages] == [role for role, _ in STAGE_LAYOUT[stage]]
    for m in messages:
        assert not re.search(r"(?<!\{)\{[A-Za-z_]\w*\}(?!\})", m.content), m.content


def test_missing_placeholder_value():
    with pytest.raises(TemplateError):
        template("dsl", "distill").render(problem="p")


def test_unknown_prompt_set_and_stage():
    with pytest.raises(TemplateError):
        fragment("nope", "reask")
    with pytest.raises(TemplateError):
        template("dsl", "nope")


def test_dsl_set_requests_the_dsl():
    text = "".join(m.content for m in template("dsl", "formulate_model").render(
        problem="p", parameters_reply="r", problem_type="t", structure="s", base_formulation="b"))
    assert "forall" in text and "sum(" in text
    assert "LaTeX mathematical format" not in text


def _norm(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def test_latex_templates_are_verbatim():
    # the published listings are Python source; compare against their runtime value
    source_doc = ROOT / "paper.md"
    if not source_doc.exists():
        pytest.skip("source document not available")
    source = _norm(source_doc.read_text(encoding="utf-8").replace("\\\\", "\\"))
    names = sorted(p.stem for p in (TEMPLATES / "latex").glob("*.txt"))
    shipped = [n for n in names if n not in INVENTED]
    assert len(shipped) == 17
    for name in shipped:
        assert _norm(fragment("latex", name).replace("\\\\", "\\")) in source, name


def test_base_formulation_library():
    assert "flow" in base_formulation("maximum flow through a reservoir network").lower()
    assert base_formulation("schedule the nurses") == "none available"
    assert classify("knapsack items with weights")[1] == "Bounded Knapsack Problem"


# ---------------------------------------------------------------- LLM agents

def test_distill_parses_structure(problems):
    doc = mock_interpret(worked_model("maxflow")).to_dict()
    agents, backend = scripted(["Sure.\n" + fenced(doc)])
    events = EventLog()
    s = agents.distill(problems["maxflow"], events)
    assert s.problem_type == "Maximum flow problem"
    assert s.provenance == "distilled_from_description"
    assert [e.stage for e in events.llm_events()] == ["distill"]
    assert problems["maxflow"].description in backend.requests[0].messages[-1].content


def test_distill_reasks_once_then_fails(problems):
    doc = mock_interpret(worked_model("knapsack")).to_dict()
    agents, backend = scripted(["no json here", fenced(doc)])
    events = EventLog()
    assert agents.distill(problems["knapsack"], events).specific_type == "Bounded Knapsack Problem"
    assert len(events.llm_events()) == 2
    retry = backend.requests[1].messages
    assert retry[-2].role == "assistant" and retry[-2].content == "no json here"

    agents, _ = scripted(["still nothing", "nothing again"])
    with pytest.raises(AgentError) as err:
        agents.distill(problems["knapsack"], EventLog())
    assert err.value.code == "AGENT_OUTPUT_INVALID"


def params_and_model(name):
    doc = model_to_dict(worked_model(name), include_provenance=False)
    params = fenced({"parameters": doc.pop("parameters")})
    return params, doc


def test_formulate_fishery(problems):
    params, doc = params_and_model("fishery")
    agents, _ = scripted([params, fenced(doc)])
    events = EventLog()
    model = agents.formulate(problems["fishery"], mock_interpret(worked_model("fishery")), events)
    assert [v.var_type for v in model.variables] == ["integer", "integer"]
    assert model.objective.sense == "maximize"
    assert str(model.provenance) == "llm_formulated"
    assert [e.detail for e in events.llm_events()] == ["parameters", "model"]


def test_formulate_warehouse_types(problems):
    params, doc = params_and_model("warehouse")
    agents, _ = scripted([params, fenced(doc)])
    model = agents.formulate(problems["warehouse"], mock_interpret(worked_model("warehouse")), EventLog())
    assert {v.symbol: v.var_type for v in model.variables} == {"x": "continuous", "y": "binary"}


def test_formulate_undeclared_symbol_reasks(problems):
    params, doc = params_and_model("knapsack")
    bad = json.loads(json.dumps(doc))
    bad["constraints"][0]["formulation"] = "sum(i in Items, Foo[i] * ItemQuantities[i]) <= MaxKnapsackWeight"
    structure = mock_interpret(worked_model("knapsack"))

    agents, backend = scripted([params, fenced(bad), fenced(doc)])
    assert agents.formulate(problems["knapsack"], structure, EventLog()) == worked_model("knapsack")
    assert "UNDECLARED_SYMBOL" in backend.requests[2].messages[-1].content

    agents, _ = scripted([params, fenced(bad), fenced(bad)])
    with pytest.raises(AgentError):
        agents.formulate(problems["knapsack"], structure, EventLog())


def test_interpret_structure_of_empty_model():
    doc = {"problem_type": "Linear Programming", "specific_type": "Trivial", "subdivisions": {},
           "implicit_constraints": {}}
    agents, _ = scripted([fenced(doc)])
    s = agents.interpret_structure(OptimizationModel(objective=Objective("", "0", "minimize")), EventLog())
    assert s.implicit_constraints == () and s.provenance == "interpreted_from_model"


@pytest.mark.parametrize("reply,score", [("Yes", 1), ("yes.", 1), ("No, flow balance is missing.", 0)])
def test_evaluate_structure(reply, score, maxflow):
    agents, _ = scripted([reply])
    s = mock_interpret(maxflow)
    v = agents.evaluate_structure(s, s, maxflow, EventLog())
    assert v.score == score
    assert v.comment == ("" if score else reply)


def test_solution_agents(problems, warehouse):
    sol = Solution("optimal", {"y[0]": 1.0}, 10.0)
    ctx = SolutionContext("Facility location", "Status: optimal", "model", "FEASIBILITY REPORT: infeasible", False)
    agents, backend = scripted(["Warehouse 0 is open.", "No. Warehouse 5 is closed but ships 90 units."])
    events = EventLog()
    narrative = agents.interpret_solution(sol, problems["warehouse"], ctx, events)
    assert narrative.text == "Warehouse 0 is open."
    v = agents.evaluate_solution(problems["warehouse"], narrative, ctx, events)
    assert v.score == 0 and "90 units" in v.comment
    assert "FEASIBILITY REPORT: infeasible" in backend.requests[1].messages[-1].content
    assert [e.stage for e in events.llm_events()] == ["sol_interp", "sol_eval"]
    with pytest.raises(ValueError):
        agents.interpret_solution(Solution("infeasible"), problems["warehouse"], ctx, EventLog())


def test_refine(problems):
    _, doc = params_and_model("maxflow")
    broken = worked_model("maxflow_missing_conservation")
    agents, _ = scripted(["```json\n" + json.dumps(doc) + "\n```"])
    ref = mock_interpret(worked_model("maxflow"))
    ctx = RefineContext("structure", mock_interpret(broken))
    refined = agents.refine(problems["maxflow"], ref, broken, "add flow balance", ctx, 1, EventLog())
    assert "Flow Conservation" in [c.name for c in refined.constraints]
    assert str(refined.provenance) == "refined(1)"
    with pytest.raises(ValueError):
        agents.refine(problems["maxflow"], ref, broken, " ", ctx, 2, EventLog())


# --------------------------------------------------------------- mock agents

def test_mock_accepts_knapsack_round_trip(problems, knapsack):
    agents, events = MockAgents(), EventLog()
    s = agents.distill(problems["knapsack"], events)
    m = agents.formulate(problems["knapsack"], s, events)
    assert m == knapsack
    v = agents.evaluate_structure(s, agents.interpret_structure(m, events), m, events)
    assert v.score == 1
    assert [e.stage for e in events.llm_events()] == ["distill", "formulate", "formulate", "stru_interp", "stru_eval"]


def test_mock_flags_dropped_constraint(problems, knapsack):
    agents = MockAgents()
    s = agents.distill(problems["knapsack"], EventLog())
    dropped = op_drop_constraint(knapsack, random.Random(0))
    v = agents.evaluate_structure(s, agents.interpret_structure(dropped, EventLog()), dropped, EventLog())
    assert v.score == 0 and "Missing from the model" in v.comment


def test_mock_solution_verdict_follows_feasibility(problems):
    agents = MockAgents()
    ctx = SolutionContext("t", "s", "f", "r", feasible=False)
    narrative = SolutionNarrative("anything")
    assert agents.evaluate_solution(problems["knapsack"], narrative, ctx, EventLog()).score == 0
    ok = SolutionContext("t", "s", "f", "r", feasible=True)
    assert agents.evaluate_solution(problems["knapsack"], narrative, ok, EventLog()).score == 1


def test_mock_formulate_unknown_problem():
    problem = ProblemInstance("x", "Schedule nurses across shifts.")
    agents = MockAgents()
    s = agents.distill(problem, EventLog())
    assert isinstance(s, ModelingStructure)
    with pytest.raises(AgentError):
        agents.formulate(problem, s, EventLog())
