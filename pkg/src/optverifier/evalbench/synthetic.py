"""Generated positive models for the verifier study, stratified by size.

Each model is a small production-planning MILP: integer output levels, shared
resources, a minimum total output and (from ``medium`` up) a binary setup
decision that links output to capacity.  All instances are bounded and
feasible by construction.
"""

from __future__ import annotations

import random

from ..model_ir import (
    Constraint,
    DecisionVariable,
    Objective,
    OptimizationModel,
    Parameter,
    Provenance,
)

STRATA = {"easy": (3, 1), "medium": (4, 2), "hard": (6, 3)}  # products, resources


def production_model(rng: random.Random, products: int, resources: int, setup: bool) -> OptimizationModel:
    use = [[rng.randint(1, 9) for _ in range(products)] for _ in range(resources)]
    avail = [sum(row) * rng.randint(2, 5) for row in use]
    profit = [rng.randint(5, 40) for _ in range(products)]
    params = [
        Parameter("NumProducts", "Number of products", products, ()),
        Parameter("NumResources", "Number of shared resources", resources, ()),
        Parameter("Products", "Index set of products", tuple(range(products)), (products,)),
        Parameter("Resources", "Index set of resources", tuple(range(resources)), (resources,)),
        Parameter("Profit", "Profit per unit of each product", tuple(profit), (products,)),
        Parameter("Use", "Resource use per unit of each product", tuple(tuple(r) for r in use), (resources, products)),
        Parameter("Available", "Available amount of each resource", tuple(avail), (resources,)),
        Parameter("MinOutput", "Minimum total output", rng.randint(1, 3), ()),
    ]
    variables = [DecisionVariable("Output", "Units produced of each product", "integer", ("NumProducts",))]
    constraints = [
        Constraint("Resource Availability", "Resource use stays within availability",
                   "sum(j in Products, Use[r,j] * Output[j]) <= Available[r] forall r in Resources"),
        Constraint("Minimum Output", "Total output reaches the minimum",
                   "sum(j in Products, Output[j]) >= MinOutput"),
        Constraint("Output Nonnegativity", "Output is nonnegative", "Output[j] >= 0 forall j in Products"),
    ]
    objective_terms = "sum(j in Products, Profit[j] * Output[j])"
    if setup:
        cap = max(avail)
        setup_cost = [rng.randint(10, 60) for _ in range(products)]
        params += [
            Parameter("SetupCost", "Fixed cost of setting up each product line", tuple(setup_cost), (products,)),
            Parameter("LineCapacity", "Output limit of a set-up line", cap, ()),
        ]
        variables.append(DecisionVariable("Setup", "Whether each product line is set up", "binary", ("NumProducts",)))
        constraints.append(Constraint("Setup Linking", "Only set-up lines produce",
                                      "Output[j] <= LineCapacity * Setup[j] forall j in Products"))
        objective_terms += " - sum(j in Products, SetupCost[j] * Setup[j])"
    objective = Objective("Maximize profit", objective_terms, "maximize")
    return OptimizationModel(tuple(params), tuple(variables), tuple(constraints), objective, Provenance("llm_formulated"))


def synthetic_positives(per_stratum: int = 10, seed: int = 0) -> list[tuple[str, str, OptimizationModel]]:
    """(id, difficulty, model) triples; ``per_stratum`` models for each of easy, medium, hard."""
    rng = random.Random(seed)
    out = []
    for difficulty, (products, resources) in STRATA.items():
        for i in range(per_stratum):
            model = production_model(rng, products, resources, setup=difficulty != "easy")
            out.append((f"{difficulty}-{i:02d}", difficulty, model))
    return out
