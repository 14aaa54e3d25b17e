"""Solver backends: an external command driven through LP files, in-process HiGHS, and brute force."""

from __future__ import annotations

import json
import os
import platform
import shutil
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ..errors import SolverError
from .grounding import GroundedModel
from .lp_writer import emit_lp, lp_names

STATUSES = ("optimal", "feasible", "infeasible", "unbounded", "error")
BUNDLED_ADAPTER = (sys.executable, "-m", "optverifier.highs_adapter", "{lp}", "{sol}")


@dataclass(frozen=True)
class Solution:
    status: str
    assignment: Mapping[str, float] = field(default_factory=dict)
    objective_value: float | None = None
    solver_id: str = ""
    wall_time_seconds: float = 0.0
    message: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown solution status {self.status!r}")

    @property
    def has_point(self) -> bool:
        return self.status in ("optimal", "feasible")

    def to_json(self, include_time: bool = True) -> dict:
        out = {
            "status": self.status,
            "objective_value": self.objective_value,
            "assignment": dict(self.assignment),
            "solver_id": self.solver_id,
        }
        if self.message:
            out["message"] = self.message
        if include_time:
            out["wall_time_seconds"] = self.wall_time_seconds
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "Solution":
        return cls(
            doc["status"],
            dict(doc.get("assignment") or {}),
            doc.get("objective_value"),
            doc.get("solver_id", ""),
            float(doc.get("wall_time_seconds", 0.0)),
            doc.get("message", ""),
        )


@dataclass(frozen=True)
class SolverConfig:
    """``backend`` is ``external`` (command + LP file), ``highs`` (in process) or ``brute_force``.

    ``command`` items may contain ``{lp}`` and ``{sol}`` placeholders; when empty the bundled
    HiGHS adapter script is used.  ``solution_format`` is ``generic_json`` or ``cbc_sol``.
    """

    backend: str = "external"
    command: tuple[str, ...] = ()
    solution_format: str = "generic_json"
    timeout_seconds: float = 60.0
    brute_force_cap: int = 10**7

    @classmethod
    def named(cls, name: str, timeout_seconds: float = 60.0) -> "SolverConfig":
        """Presets: ``highs`` (bundled adapter), ``highs-inprocess``, ``cbc``, ``brute_force``."""
        if name in ("highs", "external"):
            return cls("external", BUNDLED_ADAPTER, "generic_json", timeout_seconds)
        if name == "highs-inprocess":
            return cls("highs", (), "generic_json", timeout_seconds)
        if name == "cbc":
            exe = find_cbc()
            if exe is None:
                raise SolverError("no CBC executable found (install the 'cbc' extra or put cbc on PATH)", "SOLVER_NOT_FOUND")
            return cls("external", (exe, "{lp}", "solve", "solu", "{sol}"), "cbc_sol", timeout_seconds)
        if name in ("brute_force", "brute-force"):
            return cls("brute_force", timeout_seconds=timeout_seconds)
        raise SolverError(f"unknown solver preset {name!r}", "SOLVER_NOT_FOUND")


def find_cbc() -> str | None:
    exe = shutil.which("cbc")
    if exe:
        return exe
    try:
        import pulp  # noqa: F401 - only used to locate its bundled binary
    except ImportError:
        return None
    arch = {"x86_64": "i64", "amd64": "i64", "aarch64": "arm64", "arm64": "arm64"}.get(platform.machine().lower())
    system = {"linux": "linux", "darwin": "osx"}.get(platform.system().lower())
    if arch is None or system is None:
        return None
    candidate = Path(pulp.__file__).parent / "solverdir" / "cbc" / system / arch / "cbc"
    return str(candidate) if os.access(candidate, os.X_OK) else None


# --------------------------------------------------------- solution parsing


def parse_generic_json(text: str) -> tuple[str, float | None, dict[str, float]]:
    try:
        doc = json.loads(text)
        status = str(doc["status"]).strip().lower()
        values = {str(k): float(v) for k, v in (doc.get("values") or {}).items()}
        objective = doc.get("objective")
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise SolverError(f"cannot read generic_json solution: {exc}", "SOLVER_PARSE_ERROR") from exc
    if status not in STATUSES:
        raise SolverError(f"unknown status {status!r} in solution file", "SOLVER_PARSE_ERROR")
    return status, (None if objective is None else float(objective)), values


def parse_cbc_sol(text: str) -> tuple[str, float | None, dict[str, float]]:
    """CBC ``solu`` output: a status line, then ``index name value reduced_cost`` rows."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SolverError("empty CBC solution file", "SOLVER_PARSE_ERROR")
    head = lines[0].strip()
    lowered = head.lower()
    status = "error"
    if lowered.startswith("optimal"):
        status = "optimal"
    elif "infeasible" in lowered.split(" - ")[0]:
        status = "infeasible"
    elif lowered.startswith("unbounded"):
        status = "unbounded"
    elif lowered.startswith("stopped"):
        status = "feasible" if "objective value" in lowered and len(lines) > 1 else "error"
    objective = None
    if "objective value" in lowered:
        try:
            objective = float(head.split("objective value")[1].split()[0])
        except (IndexError, ValueError):
            objective = None
    values: dict[str, float] = {}
    for ln in lines[1:]:
        parts = ln.replace("**", " ").split()
        if len(parts) < 3:
            raise SolverError(f"bad CBC solution row {ln!r}", "SOLVER_PARSE_ERROR")
        try:
            values[parts[1]] = float(parts[2])
        except ValueError as exc:
            raise SolverError(f"bad CBC solution row {ln!r}", "SOLVER_PARSE_ERROR") from exc
    return status, objective, values


def _to_solution(grounded: GroundedModel, status: str, values: Mapping[str, float], solver_id: str,
                 elapsed: float, message: str = "") -> Solution:
    if status not in ("optimal", "feasible"):
        return Solution(status, {}, None, solver_id, elapsed, message)
    names = lp_names(grounded)
    assignment = {flat: float(values.get(lp, 0.0)) for flat, lp in names.items()}
    objective = grounded.objective.value(assignment)
    return Solution(status, assignment, objective, solver_id, elapsed, message)


def _run_external(grounded: GroundedModel, config: SolverConfig) -> Solution:
    command = config.command or BUNDLED_ADAPTER
    with tempfile.TemporaryDirectory(prefix="optverifier-") as tmp:
        lp_path = os.path.join(tmp, "model.lp")
        sol_path = os.path.join(tmp, "model.sol")
        with open(lp_path, "w", encoding="utf-8") as fh:
            fh.write(emit_lp(grounded))
        argv = [part.replace("{lp}", lp_path).replace("{sol}", sol_path) for part in command]
        start = time.perf_counter()
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=config.timeout_seconds, cwd=tmp)
        except FileNotFoundError as exc:
            raise SolverError(f"solver command not found: {argv[0]}", "SOLVER_NOT_FOUND") from exc
        except OSError as exc:
            raise SolverError(f"solver command not executable: {argv[0]}", "SOLVER_NOT_FOUND") from exc
        except subprocess.TimeoutExpired as exc:
            raise SolverError(f"solver exceeded {config.timeout_seconds} s", "TIMEOUT") from exc
        elapsed = time.perf_counter() - start
        if not os.path.exists(sol_path):
            detail = (proc.stderr or proc.stdout or "").strip()[-300:]
            raise SolverError(f"solver wrote no solution file (exit {proc.returncode}): {detail}", "SOLVER_PARSE_ERROR")
        with open(sol_path, encoding="utf-8") as fh:
            text = fh.read()
    if config.solution_format == "cbc_sol":
        status, _, values = parse_cbc_sol(text)
    elif config.solution_format == "generic_json":
        status, _, values = parse_generic_json(text)
    else:
        raise SolverError(f"unknown solution format {config.solution_format!r}", "SOLVER_PARSE_ERROR")
    return _to_solution(grounded, status, values, f"external:{Path(argv[0]).name}", elapsed)


def _run_highs(grounded: GroundedModel, config: SolverConfig) -> Solution:
    from ..highs_adapter import solve_lp_file

    with tempfile.TemporaryDirectory(prefix="optverifier-") as tmp:
        lp_path = os.path.join(tmp, "model.lp")
        with open(lp_path, "w", encoding="utf-8") as fh:
            fh.write(emit_lp(grounded))
        start = time.perf_counter()
        result = solve_lp_file(lp_path, time_limit=config.timeout_seconds)
        elapsed = time.perf_counter() - start
    values = {str(k): float(v) for k, v in result["values"].items()}
    return _to_solution(grounded, result["status"], values, "highs", elapsed, result.get("message", ""))


def solve(grounded: GroundedModel, config: SolverConfig | None = None) -> Solution:
    config = config or SolverConfig()
    if config.backend == "brute_force":
        from .brute_force import brute_force_solve

        return brute_force_solve(grounded, cap=config.brute_force_cap)
    if config.backend == "highs":
        return _run_highs(grounded, config)
    if config.backend == "external":
        return _run_external(grounded, config)
    raise SolverError(f"unknown solver backend {config.backend!r}", "SOLVER_NOT_FOUND")
