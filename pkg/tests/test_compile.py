import math

import pytest

from conftest import FIXTURES
from optverifier.agents.library import worked_model
from optverifier.compile import (
    bind_model,
    emit_lp,
    ground,
    instantiate_toy,
    load_external_parameters,
)
from optverifier.errors import CompileError, DataBindingError
from optverifier.model_ir import (
    Constraint,
    DecisionVariable,
    ExternalRef,
    Objective,
    OptimizationModel,
    Parameter,
)

DATA = FIXTURES / "data"


def model(constraints, variables=(DecisionVariable("x"),), params=(), objective="x", sense="maximize"):
    return OptimizationModel(
        tuple(params), tuple(variables),
        tuple(Constraint(f"C{i}", "", f) for i, f in enumerate(constraints)),
        Objective("", objective, sense),
    )


def test_knapsack_rows_and_variables(knapsack):
    g = ground(knapsack)
    assert [r.name for r in g.rows] == ["WeightLimitConstraint"]
    row = g.rows[0]
    assert list(row.coeffs.values()) == [23, 6, 14, 30, 15, 25]
    assert (row.relop, row.rhs) == ("<=", 60)
    assert [(v.var_type, v.lower, v.upper) for v in g.variables] == [("integer", 0.0, math.inf)] * 6
    assert list(g.objective.coeffs.values()) == [17, 4, 10, 21, 12, 18]


def test_tsp_row_count():
    g = ground(worked_model("tsp"))
    counts = {stem: len(g.rows_of(stem)) for stem in
              ("EachCityVisitedOnce", "ReturnToStartCity", "SubtourElimination",
               "PositionLowerBound", "PositionUpperBound")}
    assert counts == {"EachCityVisitedOnce": 5, "ReturnToStartCity": 5, "SubtourElimination": 12,
                      "PositionLowerBound": 5, "PositionUpperBound": 5}
    assert len(g.rows) == 32
    # guards skip the diagonal
    assert "x[0,0]" not in g.row("EachCityVisitedOnce_0").coeffs


def test_constants_move_to_rhs():
    g = ground(model(["2 * x + 3 <= 7 - x"]))
    row = g.rows[0]
    assert row.coeffs == {"x": 3.0} and row.rhs == 4.0


def test_nonnegativity_and_integrality_lowered():
    m = model(["x >= 0", "x in Integers", "x <= 5"], variables=(DecisionVariable("x", "", "continuous", (), -3),))
    g = ground(m)
    assert [r.name for r in g.rows] == ["C2"]
    assert g.var("x").var_type == "integer" and g.var("x").lower == 0.0


def test_unbound_external_parameter():
    m = model(["x <= Cap"], params=[Parameter("Cap", "", ExternalRef("caps.csv"), ())])
    with pytest.raises(CompileError) as err:
        ground(m)
    assert err.value.code == "UNBOUND_PARAMETER"
    assert "Cap" in str(err.value)
    assert ground(m, {"Cap": 4}).rows[0].rhs == 4


def test_index_out_of_range():
    m = model(["x[i] <= W[i] forall i in Items"],
              variables=[DecisionVariable("x", "", "continuous", (3,))],
              params=[Parameter("Items", "", (0, 1, 2), (3,)), Parameter("W", "", (1, 2), (2,))],
              objective="sum(i in Items, x[i])")
    with pytest.raises(CompileError) as err:
        ground(m)
    assert err.value.code == "INDEX_OUT_OF_RANGE"


def test_empty_index_set_warns():
    m = model(["x[i] <= 1 forall i in Items"], variables=[DecisionVariable("x", "", "continuous", (0,))],
              params=[Parameter("Items", "", (), (0,))], objective="0")
    g = ground(m)
    assert g.rows == [] and any("EMPTY_INDEX_SET" in w for w in g.warnings)


def test_lp_minimal_document():
    g = ground(model(["x <= 1"]))
    assert emit_lp(g) == "Maximize\n obj: x\nSubject To\n C0: x <= 1\nBounds\nEnd\n"
    assert len(emit_lp(g).splitlines()) == 6


def test_lp_golden_knapsack(knapsack):
    text = emit_lp(ground(knapsack))
    assert text == (FIXTURES / "golden" / "knapsack.lp").read_text()
    generals = text.split("Generals\n")[1].split("End")[0].split()
    assert generals == [f"ItemQuantities_{i}" for i in range(6)]


def test_lp_sections_in_order(warehouse):
    text = emit_lp(ground(warehouse))
    heads = [ln for ln in text.splitlines() if ln and not ln.startswith(" ")]
    assert heads == ["Minimize", "Subject To", "Bounds", "Binaries", "End"]
    assert " x_0_4" in text or "x_0_4 " in text


def test_lp_bounds_and_precision():
    v = [DecisionVariable("a", "", "continuous", (), 1, 2), DecisionVariable("b", "", "integer", (), 0, 7)]
    g = ground(model(["a + 0.1234567890123456 * b <= 3.5"], variables=v, objective="a - b", sense="minimize"))
    text = emit_lp(g)
    assert " 1 <= a <= 2" in text and " 0 <= b <= 7" in text
    assert "0.123456789012 b" in text
    assert "Generals\n b\n" in text
    assert " obj: a - b" in text


def test_lp_name_collision():
    v = [DecisionVariable("A_1"), DecisionVariable("A", "", "continuous", (2,))]
    g = ground(model(["A_1 + A[1] <= 1"], variables=v, objective="A_1"))
    with pytest.raises(CompileError) as err:
        emit_lp(g)
    assert err.value.code == "NAME_COLLISION"


@pytest.mark.parametrize("name", ["knapsack", "fishery", "tsp", "warehouse", "maxflow"])
def test_grounding_is_deterministic(name):
    assert emit_lp(ground(worked_model(name))) == emit_lp(ground(worked_model(name)))


# ---------------------------------------------------------------- toy data

def test_toy_matches_case_study_dimensions():
    m = worked_model("warehouse_parameterized")
    bound, bindings = instantiate_toy(m, seed=3, dim_overrides={"NumberOfLocations": 10, "NumberOfCustomers": 20})
    assert bindings["NumberOfLocations"] == 10 and bindings["NumberOfCustomers"] == 20
    assert len(bound.parameter("CustomerDemand").value) == 20
    assert len(bound.parameter("ServiceAllocationCost").value) == 10
    assert all(len(row) == 20 for row in bound.parameter("ServiceAllocationCost").value)
    assert all(1 <= v <= 20 for v in bound.parameter("MinimumDemandFromWarehouse").value)
    g = ground(bound)
    assert len(g.variables) == 10 * 20 + 10


def test_toy_default_dimensions_are_capped():
    _, bindings = instantiate_toy(worked_model("warehouse_parameterized"), seed=0)
    assert bindings["NumberOfLocations"] == 10 and bindings["NumberOfCustomers"] == 10


def test_toy_capacity_rule():
    bound, b = instantiate_toy(worked_model("warehouse_parameterized"), seed=1)
    demand = sum(b["CustomerDemand"])
    caps = b["WarehouseCapacity"]
    assert all(c == math.ceil(2 * demand / len(caps)) for c in caps)
    assert all(1 <= d <= 100 for d in b["CustomerDemand"])


def test_toy_is_deterministic():
    m = worked_model("warehouse_parameterized")
    assert instantiate_toy(m, seed=7) == instantiate_toy(m, seed=7)
    assert instantiate_toy(m, seed=7)[1] != instantiate_toy(m, seed=8)[1]


def test_toy_needs_external_parameters(knapsack):
    with pytest.raises(DataBindingError) as err:
        instantiate_toy(knapsack)
    assert err.value.code == "NO_EXTERNAL_PARAMETERS"


# ------------------------------------------------------------ external data

def bind_all(m):
    b = {}
    for name in ("customers.csv", "warehouses.csv", "costs.json"):
        b = load_external_parameters(m, DATA / name, b)
    return b


def test_csv_binding_checksum():
    m = worked_model("warehouse_parameterized")
    b = load_external_parameters(m, DATA / "customers.csv")
    assert len(b["CustomerDemand"]) == 20
    assert sum(b["CustomerDemand"]) == 1897
    assert b["NumberOfCustomers"] == 20


def test_bound_parameterized_model_equals_concrete(warehouse):
    m = worked_model("warehouse_parameterized")
    bound = bind_model(m, bind_all(m))
    assert emit_lp(ground(bound)) == emit_lp(ground(warehouse))


def test_wrong_row_count(tmp_path):
    m = worked_model("warehouse_parameterized")
    b = load_external_parameters(m, DATA / "customers.csv")
    short = tmp_path / "warehouses.csv"
    lines = (DATA / "warehouses.csv").read_text().splitlines()
    short.write_text("\n".join(lines[:5]) + "\n")
    b = load_external_parameters(m, short, b)
    with pytest.raises(DataBindingError) as err:
        load_external_parameters(m, DATA / "costs.json", b)
    assert err.value.code == "SHAPE_MISMATCH"


def test_missing_column(tmp_path):
    m = worked_model("warehouse_parameterized")
    bad = tmp_path / "customers.csv"
    bad.write_text("Demand\n1\n2\n")
    with pytest.raises(DataBindingError) as err:
        load_external_parameters(m, bad)
    assert err.value.code == "MISSING_COLUMN"


def test_absent_file(tmp_path):
    with pytest.raises(DataBindingError) as err:
        load_external_parameters(worked_model("warehouse_parameterized"), tmp_path / "customers.csv")
    assert err.value.code == "DATA_NOT_FOUND"


def test_idle_columns_appear_in_objective():
    v = [DecisionVariable("a"), DecisionVariable("b"), DecisionVariable("c")]
    text = emit_lp(ground(model(["a <= 1"], variables=v, objective="a")))
    assert " obj: a + 0 b + 0 c\n" in text
