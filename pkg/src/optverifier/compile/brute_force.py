"""Exhaustive enumeration for small pure-integer models.

Used as an independent oracle for the LP-based solvers.  Infinite variable
bounds are first tightened from the rows (a bound implied by a row holds for
every feasible point, so the optimum is unchanged); the model is enumerated
only if every variable then has a finite domain and the domain product stays
under the cap.
"""

from __future__ import annotations

import math
import time

import numpy as np

from ..errors import SolverError
from .grounding import GroundedModel
from .solvers import Solution

CHUNK = 1 << 16
FEAS_TOL = 1e-9


def _row_terms(grounded: GroundedModel):
    """Rows as (index->coef, sense, rhs) with == split into <= and >=, all as <=."""
    index = {v.name: i for i, v in enumerate(grounded.variables)}
    out = []
    for r in grounded.rows:
        coeffs = {index[k]: c for k, c in r.coeffs.items()}
        if r.relop in ("<=", "=="):
            out.append((coeffs, r.rhs))
        if r.relop in (">=", "=="):
            out.append(({k: -c for k, c in coeffs.items()}, -r.rhs))
    return out


def implied_bounds(grounded: GroundedModel, rounds: int = 20) -> tuple[list[float], list[float]]:
    """Integer-rounded bounds after iterated row propagation."""
    lo = [v.lower for v in grounded.variables]
    hi = [v.upper for v in grounded.variables]
    for i in range(len(lo)):
        lo[i] = math.ceil(lo[i] - FEAS_TOL) if math.isfinite(lo[i]) else lo[i]
        hi[i] = math.floor(hi[i] + FEAS_TOL) if math.isfinite(hi[i]) else hi[i]
    rows = _row_terms(grounded)
    for _ in range(rounds):
        changed = False
        for coeffs, rhs in rows:
            # min contribution of each term
            mins = {k: (c * lo[k] if c > 0 else c * hi[k]) for k, c in coeffs.items()}
            for k, c in coeffs.items():
                rest = 0.0
                finite = True
                for j, m in mins.items():
                    if j == k:
                        continue
                    if not math.isfinite(m):
                        finite = False
                        break
                    rest += m
                if not finite:
                    continue
                bound = (rhs - rest) / c
                if c > 0:
                    new = math.floor(bound + FEAS_TOL)
                    if new < hi[k]:
                        hi[k], changed = new, True
                else:
                    new = math.ceil(bound - FEAS_TOL)
                    if new > lo[k]:
                        lo[k], changed = new, True
        if not changed:
            break
    return lo, hi


def brute_force_solve(grounded: GroundedModel, cap: int = 10**7) -> Solution:
    start = time.perf_counter()
    for v in grounded.variables:
        if v.var_type == "continuous":
            raise SolverError(f"variable {v.name} is continuous; enumeration needs integer domains", "ORACLE_INAPPLICABLE")
    lo, hi = implied_bounds(grounded)
    names = grounded.variable_names
    n = len(names)
    if any(l > h for l, h in zip(lo, hi)):
        return Solution("infeasible", {}, None, "brute_force", time.perf_counter() - start)
    for name, l, h in zip(names, lo, hi):
        if not (math.isfinite(l) and math.isfinite(h)):
            raise SolverError(f"variable {name} has an unbounded domain", "ORACLE_INAPPLICABLE")
    sizes = [int(h - l + 1) for l, h in zip(lo, hi)]
    total = math.prod(sizes) if sizes else 1
    if total > cap:
        raise SolverError(f"{total} assignments exceed the enumeration cap {cap}", "ORACLE_INAPPLICABLE")

    index = {name: i for i, name in enumerate(names)}
    A = np.zeros((len(grounded.rows), n))
    b = np.zeros(len(grounded.rows))
    kinds = []
    for r_i, r in enumerate(grounded.rows):
        for k, c in r.coeffs.items():
            A[r_i, index[k]] = c
        b[r_i] = r.rhs
        kinds.append(r.relop)
    le = np.array([k == "<=" for k in kinds], dtype=bool)
    ge = np.array([k == ">=" for k in kinds], dtype=bool)
    eq = np.array([k == "==" for k in kinds], dtype=bool)
    tol = np.maximum(FEAS_TOL, 1e-9 * np.abs(b))
    c = np.zeros(n)
    for k, coef in grounded.objective.coeffs.items():
        c[index[k]] = coef
    sign = 1.0 if grounded.objective.sense == "maximize" else -1.0

    lo_arr = np.array(lo, dtype=np.int64) if n else np.zeros(0, dtype=np.int64)
    sizes_arr = np.array(sizes, dtype=np.int64)
    # mixed radix with the first variable most significant => ascending order is lexicographic
    strides = np.ones(n, dtype=np.int64)
    for i in range(n - 2, -1, -1):
        strides[i] = strides[i + 1] * sizes_arr[i + 1]

    best_val, best_x = -math.inf, None
    for offset in range(0, total, CHUNK):
        ids = np.arange(offset, min(total, offset + CHUNK), dtype=np.int64)
        X = (ids[:, None] // strides[None, :]) % sizes_arr[None, :] + lo_arr[None, :]
        Xf = X.astype(float)
        ok = np.ones(len(ids), dtype=bool)
        if len(grounded.rows):
            lhs = Xf @ A.T
            ok &= np.all(~le | (lhs <= b + tol), axis=1)
            ok &= np.all(~ge | (lhs >= b - tol), axis=1)
            ok &= np.all(~eq | (np.abs(lhs - b) <= tol), axis=1)
        if not ok.any():
            continue
        vals = sign * (Xf[ok] @ c)
        chunk_best = vals.max()
        if chunk_best > best_val + 1e-9 * max(1.0, abs(best_val) if math.isfinite(best_val) else 1.0):
            first = int(np.argmax(vals >= chunk_best - 1e-9 * max(1.0, abs(chunk_best))))
            best_val, best_x = chunk_best, X[ok][first]
    elapsed = time.perf_counter() - start
    if best_x is None:
        return Solution("infeasible", {}, None, "brute_force", elapsed)
    assignment = {name: float(v) for name, v in zip(names, best_x)}
    return Solution("optimal", assignment, grounded.objective.value(assignment), "brute_force", elapsed)
