"""CPLEX-LP text emission for grounded models."""

from __future__ import annotations

import math
import re

from ..errors import CompileError
from .grounding import GroundedModel

_BAD = re.compile(r"[^A-Za-z0-9_]")
_RELOP = {"<=": "<=", ">=": ">=", "==": "="}


def sanitize(name: str) -> str:
    """``x[1,2]`` -> ``x_1_2``; other characters outside [A-Za-z0-9_] become ``_``."""
    text = name.replace("[", "_").replace("]", "").replace(",", "_")
    text = _BAD.sub("_", text)
    if not text or text[0].isdigit():
        text = "v_" + text
    return text


def _unique_names(names, what: str) -> list[str]:
    out, seen = [], {}
    for name in names:
        lp = sanitize(name)
        if lp in seen:
            raise CompileError(f"{what} {name!r} and {seen[lp]!r} both become {lp!r}", "NAME_COLLISION")
        seen[lp] = name
        out.append(lp)
    return out


def lp_names(grounded: GroundedModel) -> dict[str, str]:
    """Map flat variable name -> LP column name."""
    names = grounded.variable_names
    return dict(zip(names, _unique_names(names, "variable")))


def fmt(value: float) -> str:
    return format(float(value) + 0.0, ".12g")


def _terms(coeffs: dict, names: dict[str, str], fallback: str) -> str:
    parts = []
    for var, c in coeffs.items():
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = names[var] if mag == 1 else f"{fmt(mag)} {names[var]}"
        if not parts:
            parts.append(body if sign == "+" else f"- {body}")
        else:
            parts.append(f"{sign} {body}")
    if not parts:
        return f"0 {fallback}"
    return " ".join(parts)


def emit_lp(grounded: GroundedModel) -> str:
    names = lp_names(grounded)
    row_names = _unique_names([r.name for r in grounded.rows], "row")
    fallback = names[grounded.variables[0].name] if grounded.variables else "x"
    lines = ["Maximize" if grounded.objective.sense == "maximize" else "Minimize"]
    objective = _terms(grounded.objective.coeffs, names, fallback)
    # some LP readers (CBC's) reject columns that occur in no objective term or row
    used = {v for v, c in grounded.objective.coeffs.items() if c}
    for row in grounded.rows:
        used.update(v for v, c in row.coeffs.items() if c)
    if not used and grounded.variables:
        used.add(grounded.variables[0].name)
    idle = [names[v.name] for v in grounded.variables if v.name not in used]
    if idle:
        objective += "".join(f" + 0 {n}" for n in idle)
    lines.append(f" obj: {objective}")
    lines.append("Subject To")
    for lp_row, row in zip(row_names, grounded.rows):
        lines.append(f" {lp_row}: {_terms(row.coeffs, names, fallback)} {_RELOP[row.relop]} {fmt(row.rhs)}")
    lines.append("Bounds")
    generals, binaries = [], []
    for v in grounded.variables:
        name = names[v.name]
        if v.var_type == "binary":
            binaries.append(name)
            continue
        if v.var_type == "integer":
            generals.append(name)
        lo, hi = v.lower, v.upper
        if lo == 0 and hi == math.inf:
            continue
        if lo == -math.inf and hi == math.inf:
            lines.append(f" {name} free")
        elif lo == hi:
            lines.append(f" {name} = {fmt(lo)}")
        else:
            lo_text = "-inf" if lo == -math.inf else fmt(lo)
            hi_text = "+inf" if hi == math.inf else fmt(hi)
            lines.append(f" {lo_text} <= {name} <= {hi_text}")
    if generals:
        lines.append("Generals")
        lines.extend(f" {n}" for n in generals)
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {n}" for n in binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"
