import json

import pytest
from hypothesis import given, strategies as st

from optverifier.agents.mock import mock_interpret
from optverifier.errors import ModelFormatError
from optverifier.structure import (
    ModelingStructure,
    jaccard,
    names_match,
    parse_structure,
    structure_diff,
)

MAXFLOW = {
    "problem_type": "Maximum flow problem",
    "specific_type": "Single commodity maximum flow",
    "subdivisions": {},
    "implicit_constraints": {
        "Directed Network": "Flow travels from one reservoir to another along canals.",
        "Capacity Constraints": "Each canal carries at most its capacity.",
        "Flow Conservation": "Inflow equals outflow at intermediate reservoirs.",
    },
}

KNAPSACK = {
    "problem_type": "Combinatorial Optimization",
    "specific_type": "Bounded Knapsack Problem",
    "subdivisions": {"Subdivision 1": "0/1 Knapsack Problem", "Subdivision 2": "Bounded Knapsack Problem"},
    "implicit_constraints": {"implicit constraint 1": "integer quantities",
                             "implicit constraint 2": "non-negative capacity"},
}


def without(doc: dict, name: str) -> dict:
    out = json.loads(json.dumps(doc))
    del out["implicit_constraints"][name]
    return out


def test_parse_maxflow_box():
    s = parse_structure(json.dumps(MAXFLOW))
    assert s.problem_type == "Maximum flow problem"
    assert s.specific_type == "Single commodity maximum flow"
    assert len(s.low_level) == 3
    assert s.provenance == "distilled_from_description"


def test_parse_knapsack():
    s = parse_structure(json.dumps(KNAPSACK), "interpreted_from_model")
    assert s.specific_type == "Bounded Knapsack Problem"
    assert len(s.implicit_constraints) == 2
    assert s.provenance == "interpreted_from_model"


def test_missing_problem_type():
    doc = dict(MAXFLOW)
    del doc["problem_type"]
    with pytest.raises(ModelFormatError) as err:
        parse_structure(json.dumps(doc))
    assert err.value.code == "SCHEMA_ERROR"
    assert "problem_type" in str(err.value)


def test_malformed():
    with pytest.raises(ModelFormatError) as err:
        parse_structure("{'problem_type': 1")
    assert err.value.code == "MALFORMED_JSON"


def test_empty_maps_allowed():
    s = parse_structure(json.dumps({"problem_type": "LP", "specific_type": "Diet"}))
    assert s.subdivisions == () and s.implicit_constraints == ()


def test_round_trip_keeps_order():
    s = parse_structure(json.dumps(MAXFLOW))
    assert list(json.loads(s.to_json())["implicit_constraints"]) == list(MAXFLOW["implicit_constraints"])
    assert parse_structure(s.to_json()) == s


def test_duplicate_keys_rejected_on_construction():
    with pytest.raises(ValueError):
        ModelingStructure("a", "b", implicit_constraints=(("x", ""), ("x", "")))


def test_identical():
    s = parse_structure(json.dumps(MAXFLOW))
    d = structure_diff(s, s)
    assert d.similarity == 1.0 and d.identical
    assert d.missing_low_level == () and d.extra_low_level == () and d.level_mismatch == {}


def test_missing_flow_conservation():
    ref = parse_structure(json.dumps(MAXFLOW))
    cand = parse_structure(json.dumps(without(MAXFLOW, "Flow Conservation")))
    d = structure_diff(ref, cand)
    assert d.missing_low_level == ("Flow Conservation",)
    assert d.extra_low_level == ()
    assert d.similarity == pytest.approx(2 / 3)
    assert "Flow Conservation" in d.render()


def test_mock_interpretations_of_maxflow_models(maxflow):
    from optverifier.agents.library import worked_model

    ref = mock_interpret(maxflow)
    cand = mock_interpret(worked_model("maxflow_missing_conservation"))
    d = structure_diff(ref, cand)
    assert d.missing_low_level == ("Flow Conservation",)
    assert d.similarity == pytest.approx(3 / 4)  # the variable entry also matches


def test_high_level_mismatch():
    ref = parse_structure(json.dumps(MAXFLOW))
    other = dict(MAXFLOW, problem_type="Shortest path problem")
    d = structure_diff(ref, parse_structure(json.dumps(other)))
    assert set(d.level_mismatch) == {"high"}
    assert d.similarity < 1.0


def test_paraphrase_is_not_matched():
    assert jaccard("Flow Conservation", "flow balance constraints") == pytest.approx(0.25)
    assert not names_match("Flow Conservation", "flow balance constraints")
    assert jaccard("Flow Conservation", "Balance of inflow") == 0.0
    assert names_match("capacity constraints", "Capacity Constraints")


names = st.lists(st.sampled_from(["Capacity", "Flow", "Budget", "Demand", "Supply", "Integer", "Binary", "Limit"]),
                 min_size=1, max_size=2).map(" ".join)


@given(st.lists(names, min_size=1, max_size=6, unique=True), st.data())
def test_removed_entry_detected_once(entries, data):
    # a removal is reported on exactly one side, whichever side lost the entry
    full = ModelingStructure("T", "S", implicit_constraints=tuple((e, "") for e in entries))
    gone = data.draw(st.sampled_from(entries))
    part = ModelingStructure("T", "S", implicit_constraints=tuple((e, "") for e in entries if e != gone))
    forward, backward = structure_diff(full, part), structure_diff(part, full)
    assert len(forward.missing_low_level) + len(forward.extra_low_level) == 1
    assert len(forward.missing_low_level) == len(backward.extra_low_level)
    assert len(forward.extra_low_level) == len(backward.missing_low_level)
    assert forward.similarity < 1.0 and backward.similarity < 1.0
