"""Regenerate the bundled worked-example models under src/optverifier/data."""

import json
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "optverifier" / "data"


def param(symbol, definition, value, shape=None):
    if shape is None:
        shape = []
        v = value
        while isinstance(v, list):
            shape.append(len(v))
            v = v[0] if v else None
    return {"symbol": symbol, "definition": definition, "value": value, "shape": shape}


def var(symbol, definition, vtype, shape=()):
    return {"symbol": symbol, "definition": definition, "type": vtype, "shape": list(shape)}


def con(name, description, formulation):
    return {"name": name, "description": description, "formulation": formulation}


def obj(description, formulation, sense):
    return [{"description": description, "formulation": formulation, "objective_sense": sense}]


knapsack = {
    "parameters": [
        param("TotalItems", "Number of item kinds", 6),
        param("Items", "Index set of item kinds", [0, 1, 2, 3, 4, 5]),
        param("ItemValues", "Value of one item of each kind", [17, 4, 10, 21, 12, 18]),
        param("ItemWeights", "Weight of one item of each kind", [23, 6, 14, 30, 15, 25]),
        param("MaxKnapsackWeight", "Maximum weight capacity of the knapsack", 60),
    ],
    "constraints": [
        con("Weight Limit Constraint", "Total weight of the selected items must not exceed the capacity.",
            "sum(i in Items, ItemWeights[i] * ItemQuantities[i]) <= MaxKnapsackWeight"),
        con("Non-negativity Constraint", "Quantities cannot be negative.",
            "ItemQuantities[i] >= 0 forall i in Items"),
        con("Integer Constraint", "Quantities are whole items.",
            "ItemQuantities[i] in Integers forall i in Items"),
    ],
    "variables": [var("ItemQuantities", "Number of items of each kind selected", "integer", [6])],
    "objective": obj("Maximize the total value of the selected items in the knapsack.",
                     "sum(i in Items, ItemValues[i] * ItemQuantities[i])", "Maximize"),
}

fishery = {
    "parameters": [
        param("CostPerSledDogTrip", "Cost of one sled dog trip in dollars", 50),
        param("CostPerTruckTrip", "Cost of one truck trip in dollars", 100),
        param("FishPerSledDogTrip", "Fish carried per sled dog trip", 100),
        param("FishPerTruckTrip", "Fish carried per truck trip", 300),
        param("TotalBudget", "Transport budget in dollars", 1000),
    ],
    "constraints": [
        con("Budget Constraint", "The total cost of trips must not exceed the budget.",
            "CostPerSledDogTrip * NumberOfSledDogTrips + CostPerTruckTrip * NumberOfTruckTrips <= TotalBudget"),
        con("Trip Comparison Constraint", "Sled dog trips must not exceed truck trips.",
            "NumberOfSledDogTrips <= NumberOfTruckTrips"),
        con("Non-negativity Constraints", "The number of trips must be non-negative.", "NumberOfSledDogTrips >= 0"),
        con("Non-negativity Constraints", "The number of trips must be non-negative.", "NumberOfTruckTrips >= 0"),
        con("Integer Constraints for Sled Dog Trips", "Sled dog trips are whole trips.",
            "NumberOfSledDogTrips in Integers"),
        con("Integer Constraints for Truck Trips", "Truck trips are whole trips.", "NumberOfTruckTrips in Integers"),
    ],
    "variables": [
        var("NumberOfSledDogTrips", "Number of sled dog trips", "integer"),
        var("NumberOfTruckTrips", "Number of truck trips", "integer"),
    ],
    "objective": obj("Maximize the total number of fish transported.",
                     "FishPerSledDogTrip * NumberOfSledDogTrips + FishPerTruckTrip * NumberOfTruckTrips", "Maximize"),
}

tsp = {
    "parameters": [
        param("NumCities", "Number of cities", 5),
        param("Cities", "Index set of cities", [0, 1, 2, 3, 4]),
        param("NonStartCities", "Cities other than the first one", [1, 2, 3, 4]),
        param("TravelCosts", "Travel cost from city i to city j", [
            [0, 58, 15, 75, 91],
            [58, 0, 54, 85, 11],
            [15, 54, 0, 28, 61],
            [75, 85, 28, 0, 47],
            [91, 11, 61, 47, 0],
        ]),
    ],
    "constraints": [
        con("Each City Visited Once", "Leave every city exactly once.",
            "sum(j in Cities if i != j, x[i,j]) == 1 forall i in Cities"),
        con("Return to Start City", "Enter every city exactly once.",
            "sum(i in Cities if i != j, x[i,j]) == 1 forall j in Cities"),
        con("Subtour Elimination", "Position variables forbid subtours.",
            "u[i] - u[j] + NumCities * x[i,j] <= NumCities - 1 "
            "forall i in NonStartCities forall j in NonStartCities if i != j"),
        con("Position Lower Bound", "Tour positions start at 2.", "u[i] >= 2 forall i in Cities"),
        con("Position Upper Bound", "Tour positions are at most the number of cities.",
            "u[i] <= NumCities forall i in Cities"),
    ],
    "variables": [
        var("x", "Binary variable indicating travel from city i to city j", "binary", [5, 5]),
        var("u", "Position of city i in the tour", "continuous", [5]),
    ],
    "objective": obj("Minimize the total travel cost.",
                     "sum(i in Cities, sum(j in Cities, TravelCosts[i,j] * x[i,j]))", "Minimize"),
}

demand = [117, 86, 69, 53, 110, 74, 136, 140, 126, 79, 54, 86, 114, 76, 136, 73, 144, 51, 53, 120]
alloc = [
    [80, 94, 44, 51, 190, 44, 129, 178, 129, 91, 172, 119, 177, 150, 90, 51, 53, 97, 184, 87],
    [139, 33, 104, 135, 50, 176, 97, 121, 47, 29, 186, 163, 149, 108, 156, 169, 100, 160, 153, 85],
    [153, 36, 18, 170, 18, 181, 178, 68, 171, 106, 159, 110, 21, 106, 91, 29, 144, 140, 155, 116],
    [103, 59, 78, 125, 14, 11, 152, 95, 76, 173, 36, 148, 75, 132, 59, 153, 113, 74, 185, 71],
    [193, 186, 130, 145, 114, 150, 33, 154, 20, 75, 103, 30, 137, 131, 167, 32, 53, 150, 176, 166],
    [159, 130, 156, 65, 36, 59, 199, 124, 104, 72, 180, 73, 43, 152, 143, 90, 161, 65, 172, 141],
    [173, 121, 110, 127, 22, 159, 195, 137, 47, 10, 87, 11, 154, 66, 126, 60, 152, 54, 20, 25],
    [181, 34, 186, 152, 109, 195, 133, 198, 30, 65, 69, 19, 109, 143, 108, 196, 59, 133, 10, 123],
    [82, 113, 147, 21, 88, 24, 38, 16, 70, 122, 148, 192, 116, 108, 18, 20, 143, 18, 116, 142],
    [176, 170, 87, 91, 195, 183, 124, 89, 72, 97, 89, 23, 45, 196, 97, 27, 83, 81, 171, 148],
]
capacity = [3010, 2910, 4530, 4720, 4920, 3750, 4930, 2970, 3310, 2460]
min_demand = [64, 55, 27, 71, 93, 90, 89, 87, 43, 50]
fixed = [8517, 5068, 9433, 6127, 6033, 5966, 7762, 9406, 6602, 7040]

warehouse_constraints = [
    con("DemandCustomer", "Each customer's entire demand must be met.",
        "sum(i in NumberOfLocations, x[i,j]) == CustomerDemand[j] forall j in NumberOfCustomers"),
    con("CapacityWarehouse", "A warehouse supplies at most its capacity, and nothing when closed.",
        "sum(j in NumberOfCustomers, x[i,j]) <= WarehouseCapacity[i] * y[i] forall i in NumberOfLocations"),
    con("MinDemandIfOpen", "An open warehouse serves at least its minimum demand.",
        "sum(j in NumberOfCustomers, x[i,j]) >= MinimumDemandFromWarehouse[i] * y[i] forall i in NumberOfLocations"),
    con("MinOpenWarehouses", "At least the minimum number of warehouses are open.",
        "sum(i in NumberOfLocations, y[i]) >= MinimumOpenWarehouses"),
    con("MaxOpenWarehouses", "At most the maximum number of warehouses are open.",
        "sum(i in NumberOfLocations, y[i]) <= MaximumOpenWarehouses"),
    con("NonNegativeService", "Service allocations are non-negative.",
        "x[i,j] >= 0 forall i in NumberOfLocations forall j in NumberOfCustomers"),
]
warehouse_objective = obj(
    "Minimize service allocation costs plus fixed operating costs of open warehouses.",
    "sum(i in NumberOfLocations, sum(j in NumberOfCustomers, ServiceAllocationCost[i,j] * x[i,j]))"
    " + sum(i in NumberOfLocations, WarehouseFixedCost[i] * y[i])",
    "Minimize",
)

warehouse = {
    "parameters": [
        param("NumberOfLocations", "Number of potential warehouse locations", 10),
        param("NumberOfCustomers", "Number of customers", 20),
        param("CustomerDemand", "Demand of each customer", demand),
        param("ServiceAllocationCost", "Cost of serving customer j from warehouse i", alloc),
        param("WarehouseCapacity", "Capacity of each warehouse", capacity),
        param("MinimumDemandFromWarehouse", "Minimum demand served by an open warehouse", min_demand),
        param("MinimumOpenWarehouses", "Minimum number of open warehouses", 3),
        param("MaximumOpenWarehouses", "Maximum number of open warehouses", 8),
        param("WarehouseFixedCost", "Fixed operating cost of each warehouse", fixed),
    ],
    "constraints": warehouse_constraints,
    "variables": [
        var("x", "Amount of customer j's demand served by warehouse i", "continuous", [10, 20]),
        var("y", "Binary variable indicating whether warehouse i is open", "binary", [10]),
    ],
    "objective": warehouse_objective,
}

warehouse_param = {
    "parameters": [
        param("NumberOfLocations", "Number of potential warehouse locations", 2000),
        param("NumberOfCustomers", "Number of customers", 20000),
        param("CustomerDemand", "Demand of each customer",
              {"external": "customers.csv"}, ["NumberOfCustomers"]),
        param("ServiceAllocationCost", "Cost of serving customer j from warehouse i",
              {"external": "costs.json"}, ["NumberOfLocations", "NumberOfCustomers"]),
        param("WarehouseCapacity", "Capacity of each warehouse",
              {"external": "warehouses.csv"}, ["NumberOfLocations"]),
        param("MinimumDemandFromWarehouse", "Minimum demand served by an open warehouse",
              {"external": "warehouses.csv", "toy_range": [1, 20]}, ["NumberOfLocations"]),
        param("MinimumOpenWarehouses", "Minimum number of open warehouses", 3),
        param("MaximumOpenWarehouses", "Maximum number of open warehouses", 8),
        param("WarehouseFixedCost", "Fixed operating cost of each warehouse",
              {"external": "warehouses.csv"}, ["NumberOfLocations"]),
    ],
    "constraints": warehouse_constraints,
    "variables": [
        var("x", "Amount of customer j's demand served by warehouse i", "continuous",
            ["NumberOfLocations", "NumberOfCustomers"]),
        var("y", "Binary variable indicating whether warehouse i is open", "binary", ["NumberOfLocations"]),
    ],
    "objective": warehouse_objective,
}

# Synthetic 9-reservoir canal network; no arcs enter the source or leave the sink.
N = 9
arcs = {
    (0, 1): 10, (0, 2): 8, (0, 3): 6,
    (1, 2): 3, (1, 4): 5,
    (2, 4): 4, (2, 5): 6,
    (3, 5): 5, (3, 6): 4,
    (4, 7): 9,
    (5, 6): 3, (5, 7): 4,
    (6, 8): 8,
    (7, 8): 12,
}
cap = [[arcs.get((i, j), 0) for j in range(N)] for i in range(N)]

maxflow_base_constraints = [
    con("Capacity Constraints", "Flow on each canal is at most its capacity.",
        "x[i,j] <= Capacity[i,j] forall i in Reservoirs forall j in Reservoirs"),
    con("Non-negativity", "Flows are non-negative.", "x[i,j] >= 0 forall i in Reservoirs forall j in Reservoirs"),
]
maxflow_conservation = con(
    "Flow Conservation",
    "Water entering an intermediate reservoir equals water leaving it.",
    "sum(j in Reservoirs if j != k, x[k,j]) == sum(i in Reservoirs if i != k, x[i,k]) forall k in IntermediateReservoirs",
)


def maxflow(with_conservation):
    return {
        "parameters": [
            param("Reservoirs", "Index set of reservoirs", list(range(N))),
            param("IntermediateReservoirs", "Reservoirs other than source 0 and sink 8", list(range(1, N - 1))),
            param("Capacity", "Maximum daily transfer from reservoir i to reservoir j", cap),
        ],
        "constraints": maxflow_base_constraints + ([maxflow_conservation] if with_conservation else []),
        "variables": [var("x", "Water transferred from reservoir i to reservoir j per day", "continuous", [N, N])],
        "objective": obj("Maximize the water transferred out of reservoir 0.",
                         "sum(j in Reservoirs, x[0,j])", "Maximize"),
    }


MODELS = {
    "knapsack": knapsack,
    "fishery": fishery,
    "tsp": tsp,
    "warehouse": warehouse,
    "warehouse_parameterized": warehouse_param,
    "maxflow": maxflow(True),
    "maxflow_missing_conservation": maxflow(False),
}

cap_lines = "; ".join(f"{i} to {j}: {c}" for (i, j), c in sorted(arcs.items()))
INSTANCES = [
    {"id": "knapsack", "category": "knapsack", "difficulty": "easy", "ground_truth_objective": 48,
     "description": (
         "Pack a knapsack with items of 6 kinds to maximize total value. Item values are "
         "[17, 4, 10, 21, 12, 18] and item weights are [23, 6, 14, 30, 15, 25]. Several items of the same "
         "kind may be packed. The total weight may not exceed the knapsack capacity of 60.")},
    {"id": "fishery", "category": "resource allocation", "difficulty": "easy", "ground_truth_objective": 3000,
     "description": (
         "A fishery ships its catch using sled dog trips or truck trips. A sled dog trip carries 100 fish "
         "and costs $50; a truck trip carries 300 fish and costs $100. Spending may not exceed $1000 and "
         "there may not be more sled dog trips than truck trips. Maximize the number of fish shipped.")},
    {"id": "tsp", "category": "traveling salesman", "difficulty": "medium", "ground_truth_objective": 159,
     "description": (
         "A salesperson must visit five cities, numbered 1 to 5, each exactly once and return to the city "
         "where the tour started, minimizing total travel cost. Symmetric travel costs: 1-2: 58, 1-3: 15, "
         "1-4: 75, 1-5: 91, 2-3: 54, 2-4: 85, 2-5: 11, 3-4: 28, 3-5: 61, 4-5: 47.")},
    {"id": "warehouse", "category": "facility location", "difficulty": "hard",
     "description": (
         "Choose which of 10 candidate warehouses to open so that 20 customers are fully served at minimum "
         "service allocation plus fixed operating cost. Each warehouse has a capacity, a fixed cost and a "
         "minimum demand it must serve if open; between 3 and 8 warehouses may be operational. "
         f"Customer demands: {demand}. Capacities: {capacity}. Minimum served demand if open: {min_demand}. "
         f"Fixed costs: {fixed}. Allocation costs (warehouse rows, customer columns): {alloc}.")},
    {"id": "maxflow", "category": "maximum flow", "difficulty": "medium",
     "description": (
         "A canal network connects 9 reservoirs numbered 0 to 8. The daily transfer capacity of each canal "
         f"is: {cap_lines}. Determine the maximum amount of water that can be moved from reservoir 0 to "
         "reservoir 8 per day.")},
]


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    for name, doc in MODELS.items():
        (DATA / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
    with open(DATA / "instances.jsonl", "w") as fh:
        for inst in INSTANCES:
            fh.write(json.dumps(inst) + "\n")


if __name__ == "__main__":
    main()
