import json
import math
import time
from types import SimpleNamespace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from optverifier.agents import MockAgents
from optverifier.agents.library import worked_model
from optverifier.compile import SolverConfig, ground, solve
from optverifier.errors import BenchError, SolverError
from optverifier.evalbench import (
    Confusion,
    InstanceResult,
    PerturbationSpec,
    efficiency_table,
    load_dataset,
    perturb_model,
    positives_from_models,
    score_solving_accuracy,
    synthetic_positives,
    tsp_tour_oracle,
    verifier_study,
    write_bench_report,
)
from optverifier.evalbench.perturb import op_drop_constraint, op_flip_var_type
from optverifier.evalbench.study import Sample, confusion
from optverifier.events import Event
from optverifier.model_ir import canonical_key, validate_model

# the five-city cost matrix of the worked routing example, typed in from the problem statement
TSP_COSTS = [
    [0, 58, 15, 75, 91],
    [58, 0, 54, 85, 11],
    [15, 54, 0, 28, 61],
    [75, 85, 28, 0, 47],
    [91, 11, 61, 47, 0],
]


class First:
    """Stand-in rng that always picks the first candidate."""

    def randrange(self, n):
        return 0


def result(i, predicted, truth, outcome="accepted", status="optimal", dataset="d"):
    return InstanceResult(f"p{i}", dataset, None, outcome, status, predicted, truth)


# ------------------------------------------------------------------ datasets


def test_load_dataset_three_lines(tmp_path):
    path = tmp_path / "d.jsonl"
    rows = [{"id": f"q{i}", "description": f"problem {i}", "ground_truth_objective": i} for i in range(3)]
    rows[1]["difficulty"] = "hard"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n\n")
    got = load_dataset(path)
    assert [p.id for p in got] == ["q0", "q1", "q2"]
    assert got[1].difficulty == "hard"
    assert got[2].ground_truth_objective == 2.0


def test_missing_description_names_the_line(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"id": "a", "description": "ok"}\n{"id": "b"}\n')
    with pytest.raises(BenchError) as err:
        load_dataset(path)
    assert err.value.code == "MALFORMED_LINE"
    assert "line 2" in str(err.value)


@pytest.mark.parametrize("line", ["not json", '["a"]', '{"id": "a", "description": "x", "ground_truth_objective": "7"}'])
def test_malformed_lines(tmp_path, line):
    path = tmp_path / "d.jsonl"
    path.write_text(line + "\n")
    with pytest.raises(BenchError) as err:
        load_dataset(path)
    assert err.value.code == "MALFORMED_LINE"


def test_missing_dataset(tmp_path):
    with pytest.raises(BenchError) as err:
        load_dataset(tmp_path / "nope.jsonl")
    assert err.value.code == "DATASET_NOT_FOUND"


# ------------------------------------------------------------------ scoring


def test_two_of_four_correct():
    results = [result(0, 48, 48), result(1, 3000, 3000), result(2, 10, 11), result(3, 5, 5, outcome="budget_exhausted")]
    report = score_solving_accuracy(results)
    assert report.sa == 0.5
    assert report.correct == [True, True, False, False]


def test_relative_tolerance_accepts_near_miss():
    # |2999.9999 - 3000| = 1e-4, well inside max(1e-6, 1e-4 * 3000) = 0.3
    assert score_solving_accuracy([result(0, 2999.9999, 3000)]).sa == 1.0
    assert score_solving_accuracy([result(0, 2999.5, 3000)]).sa == 0.0


def test_absolute_branch_near_zero():
    assert score_solving_accuracy([result(0, 5e-7, 0)]).sa == 1.0
    assert score_solving_accuracy([result(0, 5e-6, 0)]).sa == 0.0


def test_non_optimal_status_is_wrong():
    assert score_solving_accuracy([result(0, 48, 48, status="feasible")]).sa == 0.0


def test_no_truth_reports_na():
    report = score_solving_accuracy([result(0, 1, None), result(1, 2, None)])
    assert report.sa is None
    assert report.macro_sa is None
    assert report.without_truth == ["p0", "p1"]
    assert "SA (micro, per instance): n/a" in report.to_markdown()


def test_instances_without_truth_are_excluded():
    report = score_solving_accuracy([result(0, 48, 48), result(1, 7, None)])
    assert report.sa == 1.0
    assert report.overall.instances == 2 and report.overall.with_truth == 1


def test_macro_is_mean_of_dataset_sa():
    results = [result(0, 1, 1, dataset="a"), result(1, 1, 2, dataset="a"), result(2, 1, 1, dataset="b")]
    report = score_solving_accuracy(results)
    assert report.sa == pytest.approx(2 / 3)
    assert report.macro_sa == pytest.approx(0.75)


@given(
    truth=st.floats(min_value=1.0, max_value=1e6),
    rel_error=st.floats(min_value=-3e-4, max_value=3e-4),
    factor=st.floats(min_value=1.0, max_value=1e3),
)
def test_scale_consistency(truth, rel_error, factor):
    # truth >= 1 and factor >= 1 keep every comparison on the relative branch
    pred = truth * (1 + rel_error)
    if abs(abs(pred - truth) - 1e-4 * truth) < 1e-9 * truth:
        return  # too close to the boundary for float rounding to be meaningful
    base = score_solving_accuracy([result(0, pred, truth)]).correct[0]
    scaled = score_solving_accuracy([result(0, pred * factor, truth * factor)]).correct[0]
    assert base == scaled


def test_write_bench_report(tmp_path):
    results = [result(0, 48, 48), result(1, 7, None)]
    paths = write_bench_report(score_solving_accuracy(results), tmp_path / "out")
    doc = json.loads(paths["json"].read_text())
    assert doc["aggregate"]["micro_instance_sa"] == 1.0
    assert doc["aggregate"]["without_truth"] == ["p1"]
    assert "time" not in json.dumps(doc["instances"])
    assert "| p0 | accepted | optimal | 48 | 48 | yes |" in paths["markdown"].read_text()
    assert set(json.loads(paths["timing"].read_text())["instances"]) == {"p0", "p1"}


# ------------------------------------------------------------------ perturbations


def test_knapsack_nine_distinct_valid(knapsack):
    out = perturb_model(knapsack, PerturbationSpec(seed=7, k=9))
    assert len(out) == 9
    keys = {canonical_key(m) for m in out} | {canonical_key(knapsack)}
    assert len(keys) == 10
    for m in out:
        assert validate_model(m).valid
        assert m.provenance.kind == "perturbed" and m.provenance.seed == 7 and m.provenance.op


def test_perturbation_is_deterministic(warehouse):
    spec = PerturbationSpec(seed=3, k=5)
    first = [canonical_key(m) for m in perturb_model(warehouse, spec)]
    assert first == [canonical_key(m) for m in perturb_model(warehouse, spec)]


def test_restricted_ops_are_tagged(warehouse):
    out = perturb_model(warehouse, PerturbationSpec(seed=1, k=4, ops=("drop_constraint",)))
    assert {m.provenance.op for m in out} == {"drop_constraint"}
    assert all(len(m.constraints) == len(warehouse.constraints) - 1 for m in out)


def test_exhaustion(fishery):
    # only as many distinct constraint drops exist as there are constraints
    k = len(fishery.constraints) + 1
    with pytest.raises(BenchError) as err:
        perturb_model(fishery, PerturbationSpec(k=k, ops=("drop_constraint",)))
    assert err.value.code == "PERTURBATION_EXHAUSTED"


@pytest.mark.parametrize("kw", [{"k": 0}, {"ops": ()}, {"ops": ("rename",)}])
def test_spec_invariants(kw):
    with pytest.raises(ValueError):
        PerturbationSpec(**kw)


def test_dropping_weight_row_is_unbounded(knapsack, fast_solver):
    dropped = op_drop_constraint(knapsack, First())
    assert [c.name for c in dropped.constraints] == ["Non-negativity Constraint", "Integer Constraint"]
    grounded = ground(dropped)
    assert solve(grounded, fast_solver).status == "unbounded"
    # enumeration has nothing to cap the positive-profit items with
    with pytest.raises(SolverError) as err:
        solve(grounded, SolverConfig.named("brute_force"))
    assert err.value.code == "ORACLE_INAPPLICABLE"


def test_flip_binary_open_variable(warehouse):
    flipped = op_flip_var_type(warehouse, First())
    y = flipped.variable("y")
    assert (y.var_type, y.lower_bound, y.upper_bound) == ("continuous", 0, 1)
    flat = {v.name: v for v in ground(flipped).variables}
    assert all((flat[f"y[{i}]"].var_type, flat[f"y[{i}]"].lower, flat[f"y[{i}]"].upper) == ("continuous", 0, 1)
               for i in range(10))


# ------------------------------------------------------------------ verifier study


def test_confusion_formula():
    c = Confusion(tp=9, fp=1, fn=1)
    assert c.precision == pytest.approx(0.9) and c.recall == pytest.approx(0.9)
    assert Confusion().precision is None and Confusion().recall is None


def test_all_flagged():
    samples = [Sample("p", "easy", i > 0, "op", True, None) for i in range(10)]
    c = confusion(samples, "structure")
    assert c.precision == pytest.approx(0.9) and c.recall == 1.0


def test_abstentions_are_counted_apart():
    samples = [Sample("p", "easy", True, "op", None, None), Sample("p", "easy", True, "op", True, False)]
    assert confusion(samples, "structure") == Confusion(tp=1, abstained=1)
    assert confusion(samples, "either") == Confusion(tp=1, abstained=1)
    assert confusion(samples, "solution") == Confusion(fn=1, abstained=1)


@pytest.fixture(scope="module")
def mock_study():
    started = time.perf_counter()
    positives = positives_from_models(synthetic_positives(per_stratum=10, seed=0))
    result = verifier_study(positives, PerturbationSpec(seed=0, k=9), MockAgents())
    return result, time.perf_counter() - started


def test_study_sample_counts(mock_study):
    result, _ = mock_study
    assert len(result.samples) == 300
    for samples in result.strata().values():
        assert len(samples) == 100
        assert sum(not s.perturbed for s in samples) == 10


def test_mock_recall_on_drop_ops(mock_study):
    result, elapsed = mock_study
    metrics = result.metrics("structure", ops=("drop_constraint", "drop_variable"))
    assert list(metrics) == ["easy", "medium", "hard", "all"]
    for c in metrics.values():
        assert c.recall == 1.0 and c.precision == 1.0 and c.abstained == 0
    assert metrics["all"].tp > 0
    assert elapsed < 30


def test_study_report(mock_study):
    result, _ = mock_study
    doc = result.to_json()
    assert doc["samples"] == 300
    assert doc["per_stratum_samples"] == {"easy": 100, "medium": 100, "hard": 100}
    assert "| structure | all | 300 |" in result.to_markdown()


def test_solution_side(fast_solver):
    positives = positives_from_models(synthetic_positives(per_stratum=1, seed=2)[:1])
    result = verifier_study(positives, PerturbationSpec(seed=0, k=3), MockAgents(), fast_solver)
    assert len(result.samples) == 4
    assert result.samples[0].solution_flag is False
    assert all(s.solution_flag is not None or s.note for s in result.samples)


# ------------------------------------------------------------------ oracles


def held_karp(cost) -> float:
    """Independent dynamic-programming optimum for the same directed tour problem."""
    n = len(cost)
    best = {(1 << j, j): cost[0][j] for j in range(1, n)}
    for size in range(2, n):
        for (mask, last), c in list(best.items()):
            if bin(mask).count("1") != size - 1:
                continue
            for j in range(1, n):
                if not mask & (1 << j):
                    key = (mask | (1 << j), j)
                    best[key] = min(best.get(key, math.inf), c + cost[last][j])
    full = sum(1 << j for j in range(1, n))
    return min(best[(full, j)] + cost[j][0] for j in range(1, n))


def test_tsp_oracle_worked_matrix():
    cost, tour = tsp_tour_oracle(TSP_COSTS)
    assert cost == 159 == held_karp(TSP_COSTS)
    assert tour == (0, 1, 4, 3, 2, 0)


def test_tsp_oracle_two_cities():
    assert tsp_tour_oracle([[0, 7], [7, 0]]) == (14.0, (0, 1, 0))


def test_tsp_oracle_limits():
    with pytest.raises(BenchError) as err:
        tsp_tour_oracle([[1] * 11 for _ in range(11)])
    assert err.value.code == "TOO_LARGE"
    with pytest.raises(BenchError):
        tsp_tour_oracle([[0, 1], [1]])


@given(st.integers(min_value=3, max_value=6).flatmap(
    lambda n: st.lists(st.lists(st.integers(0, 50), min_size=n, max_size=n), min_size=n, max_size=n)))
def test_tsp_oracle_matches_dp(cost):
    value, tour = tsp_tour_oracle(cost)
    assert value == held_karp(cost)
    assert sorted(tour[1:-1]) == list(range(1, len(cost)))
    assert sum(cost[a][b] for a, b in zip(tour, tour[1:])) == value


def test_tsp_model_agrees_with_oracle(fast_solver):
    solution = solve(ground(worked_model("tsp")), fast_solver)
    assert solution.objective_value == pytest.approx(tsp_tour_oracle(TSP_COSTS)[0], abs=1e-6)


# ------------------------------------------------------------------ efficiency


def record(instance_id, calls, tokens=100, wall_time=1.0, events=()):
    return SimpleNamespace(instance_id=instance_id, events=list(events),
                           totals=SimpleNamespace(agent_calls=calls, tokens=tokens, wall_time=wall_time))


def row(table: str, name: str) -> list[str]:
    return next(line.split() for line in table.splitlines() if line.startswith(name))


def test_efficiency_single_record():
    assert row(efficiency_table([record("a", 9)]), "all")[:5] == ["all", "1", "1.00", "9.0", "100.0"]


def test_efficiency_two_records():
    table = efficiency_table([record("a", 8, 100, 1.0), record("b", 10, 300, 2.0)])
    assert row(table, "all")[:5] == ["all", "2", "1.50", "9.0", "200.0"]


def test_efficiency_empty():
    lines = efficiency_table([]).splitlines()
    assert len(lines) == 2 and lines[0].startswith("Dataset")


def test_efficiency_per_dataset_and_stage():
    ev = Event(0, "distill", "llm", 0.0, 0.1, prompt_tokens=30, completion_tokens=12)
    table = efficiency_table([record("a", 9, events=[ev]), record("b", 7)], {"a": "nl4", "b": "mamo"})
    assert row(table, "nl4")[3] == "9.0" and row(table, "mamo")[3] == "7.0"
    stage_rows = table.split("Mean tokens per stage")[1]
    assert row(stage_rows, "nl4")[1] == "42.0"
    assert row(stage_rows, "mamo")[1] == "0.0"
