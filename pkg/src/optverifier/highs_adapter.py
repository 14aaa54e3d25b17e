"""Solve an LP file with HiGHS and write a generic_json solution file.

Kept outside the compile package so the solver subprocess starts without importing it.
"""

from __future__ import annotations

import json
import sys

USAGE = "usage: python -m optverifier.highs_adapter MODEL.lp SOLUTION.json"


def _status_name(h, highspy) -> str:
    status = h.getModelStatus()
    S = highspy.HighsModelStatus
    if status == S.kOptimal:
        return "optimal"
    if status == S.kInfeasible:
        return "infeasible"
    if status == S.kUnbounded:
        return "unbounded"
    if status == S.kUnboundedOrInfeasible:
        return "unbounded_or_infeasible"
    if status == S.kModelEmpty:
        return "optimal"
    if h.getInfo().primal_solution_status == 2:  # feasible point available
        return "feasible"
    return "error"


def solve_lp_file(lp_path: str, time_limit: float | None = None) -> dict:
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    if time_limit is not None:
        h.setOptionValue("time_limit", float(time_limit))
    if h.readModel(str(lp_path)) == highspy.HighsStatus.kError:
        return {"status": "error", "objective": None, "values": {}, "message": "HiGHS could not read the LP file"}
    h.run()
    status = _status_name(h, highspy)
    if status == "unbounded_or_infeasible":
        # Decide by checking feasibility with the objective switched off.
        lp = h.getLp()
        h.changeColsCost(lp.num_col_, list(range(lp.num_col_)), [0.0] * lp.num_col_)
        h.run()
        status = "unbounded" if h.getModelStatus() == highspy.HighsModelStatus.kOptimal else "infeasible"
        return {"status": status, "objective": None, "values": {}}
    if status not in ("optimal", "feasible"):
        return {"status": status, "objective": None, "values": {}}
    lp = h.getLp()
    values = list(h.getSolution().col_value)
    names = list(lp.col_names_) if lp.col_names_ else [f"c{i}" for i in range(lp.num_col_)]
    return {
        "status": status,
        "objective": h.getInfo().objective_function_value,
        "values": dict(zip(names, values)),
    }


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if len(argv) != 2:
        print(USAGE, file=sys.stderr)
        return 2
    result = solve_lp_file(argv[0])
    with open(argv[1], "w", encoding="utf-8") as fh:
        json.dump(result, fh)
    return 0


if __name__ == "__main__":
    sys.exit(main())
