"""Small built-in knowledge: base formulation sketches, problem-type keywords, worked models."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib.resources import files

from ..model_ir import OptimizationModel, parse_model_json

NO_BASE_FORMULATION = "none available"


@dataclass(frozen=True)
class LibraryEntry:
    key: str
    keywords: tuple[str, ...]
    problem_type: str
    specific_type: str
    sketch: str


ENTRIES = (
    LibraryEntry(
        "max_flow",
        ("maximum flow", "max flow", "max-flow", "flow conservation", "reservoir", "canal", "pipeline network"),
        "Maximum flow problem",
        "Single commodity maximum flow",
        "Maximum flow: a variable x[i,j] >= 0 for the flow on every arc, capacity rows x[i,j] <= Capacity[i,j], "
        "flow conservation at every node except the source and the sink (total inflow equals total outflow), "
        "and the objective maximizes the total flow leaving the source.",
    ),
    LibraryEntry(
        "knapsack",
        ("knapsack",),
        "Combinatorial Optimization",
        "Bounded Knapsack Problem",
        "Knapsack: an integer (or binary) variable per item kind counting how many are packed, one weight row "
        "sum(i, Weight[i] * x[i]) <= Capacity, non-negativity, and the objective maximizes sum(i, Value[i] * x[i]).",
    ),
    LibraryEntry(
        "tsp",
        ("traveling salesman", "travelling salesman", "salesperson", "salesman", "visit each city", "subtour"),
        "Combinatorial Optimization",
        "Traveling Salesman Problem",
        "Traveling salesman: binary x[i,j] = 1 when the tour goes from city i to city j, each city left exactly once, "
        "each city entered exactly once, Miller-Tucker-Zemlin rows u[i] - u[j] + n * x[i,j] <= n - 1 over non-start "
        "cities to forbid subtours, and the objective minimizes total travel cost.",
    ),
    LibraryEntry(
        "facility_location",
        ("warehouse", "facility location", "facilities", "open a facility", "fixed operating cost"),
        "Facility location problem",
        "Capacitated facility location",
        "Capacitated facility location: binary y[i] opens site i, continuous x[i,j] >= 0 serves customer j from "
        "site i, every customer's demand is met exactly, shipments from a site stay within its capacity times y[i], "
        "optional limits on the number of open sites, and the objective minimizes service plus fixed costs.",
    ),
    LibraryEntry(
        "transportation",
        ("transportation problem", "supplies", "shipping cost", "shipment", "supply node"),
        "Linear Programming",
        "Transportation Problem",
        "Transportation: continuous x[i,j] >= 0 ships from source i to destination j, shipments out of each source "
        "stay within its supply, shipments into each destination cover its demand, and the objective minimizes "
        "total shipping cost.",
    ),
    LibraryEntry(
        "diet",
        ("diet", "nutrient", "nutrition", "calories"),
        "Linear Programming",
        "Diet Problem",
        "Diet: continuous x[f] >= 0 servings of each food, for each nutrient the intake sum(f, Content[n,f] * x[f]) "
        "lies between its minimum and maximum requirement, and the objective minimizes food cost.",
    ),
    LibraryEntry(
        "resource_allocation",
        ("trips", "per trip", "budget"),
        "Linear Programming",
        "Resource Allocation Problem",
        "Resource allocation: a variable per activity level, one row per limited resource "
        "sum(a, Use[r,a] * x[a]) <= Available[r], side conditions linking activities, and a linear objective.",
    ),
)

DEFAULT_TYPES = ("Linear Programming", "General linear model")


def _score(entry: LibraryEntry, text: str) -> int:
    return sum(1 for kw in entry.keywords if re.search(r"\b" + re.escape(kw) + r"\b", text))


def best_entry(text: str) -> LibraryEntry | None:
    """Entry with the most keyword hits in ``text``; earlier entries win ties."""
    lowered = text.lower()
    best, best_score = None, 0
    for entry in ENTRIES:
        s = _score(entry, lowered)
        if s > best_score:
            best, best_score = entry, s
    return best


def base_formulation(text: str) -> str:
    entry = best_entry(text)
    return entry.sketch if entry else NO_BASE_FORMULATION


def classify(text: str) -> tuple[str, str]:
    entry = best_entry(text)
    return (entry.problem_type, entry.specific_type) if entry else DEFAULT_TYPES


# ------------------------------------------------------- worked-example models

WORKED_MODELS = {
    "knapsack": ("knapsack",),
    "fishery": ("fishery", "sled dog", "sled dogs", "fish"),
    "tsp": ("salesman", "salesperson", "traveling salesman", "cities"),
    "warehouse": ("warehouse", "warehouses"),
    "maxflow": ("reservoir", "reservoirs", "maximum flow", "canal"),
}


@lru_cache(maxsize=None)
def worked_model(name: str) -> OptimizationModel:
    text = (files("optverifier") / "data" / f"{name}.json").read_text(encoding="utf-8")
    return parse_model_json(text)


def match_worked_model(text: str) -> str | None:
    lowered = text.lower()
    best, best_score = None, 0
    for name, keywords in WORKED_MODELS.items():
        s = sum(1 for kw in keywords if re.search(r"\b" + re.escape(kw) + r"\b", lowered))
        if s > best_score:
            best, best_score = name, s
    return best
