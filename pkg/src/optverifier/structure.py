"""Multi-level modeling structure and a deterministic structure diff.

Levels map onto the JSON produced by the distillation prompt: ``problem_type``
is the high level, ``specific_type`` the medium level, and the low level is
held in ``implicit_constraints`` (``subdivisions`` is kept alongside but does
not take part in the low-level comparison).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any

from .errors import ModelFormatError

MATCH_THRESHOLD = 0.5
LEVEL_PENALTY = 0.5  # similarity multiplier per disagreeing level

_WORD = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class ModelingStructure:
    problem_type: str
    specific_type: str
    subdivisions: tuple[tuple[str, str], ...] = ()
    implicit_constraints: tuple[tuple[str, str], ...] = ()
    provenance: str = "distilled_from_description"  # or interpreted_from_model

    def __post_init__(self):
        if not self.problem_type.strip() or not self.specific_type.strip():
            raise ValueError("problem_type and specific_type must be non-empty")
        for label, entries in (("subdivisions", self.subdivisions), ("implicit_constraints", self.implicit_constraints)):
            names = [k for k, _ in entries]
            if len(names) != len(set(names)):
                raise ValueError(f"duplicate keys in {label}")

    @property
    def low_level(self) -> list[str]:
        return [name for name, _ in self.implicit_constraints]

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem_type": self.problem_type,
            "specific_type": self.specific_type,
            "subdivisions": dict(self.subdivisions),
            "implicit_constraints": dict(self.implicit_constraints),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, ensure_ascii=False)


def _entries(raw, path: str) -> tuple[tuple[str, str], ...]:
    if raw is None:
        return ()
    if isinstance(raw, dict):
        items = [(str(k), v if isinstance(v, str) else json.dumps(v)) for k, v in raw.items()]
    elif isinstance(raw, list):
        # tolerate a bare list of descriptions
        items = [(str(v), "") if not isinstance(v, dict) else (str(v.get("name", i)), str(v.get("description", "")))
                 for i, v in enumerate(raw)]
    else:
        raise ModelFormatError(f"{path} must be an object", "SCHEMA_ERROR")
    seen, out = set(), []
    for key, desc in items:
        if key in seen:
            continue
        seen.add(key)
        out.append((key, desc))
    return tuple(out)


def structure_from_dict(doc: Any, provenance: str = "distilled_from_description") -> ModelingStructure:
    if not isinstance(doc, dict):
        raise ModelFormatError("structure JSON must be an object", "SCHEMA_ERROR")
    for key in ("problem_type", "specific_type"):
        if key not in doc or not str(doc[key]).strip():
            raise ModelFormatError(f"missing required key {key!r} at $", "SCHEMA_ERROR")
    return ModelingStructure(
        str(doc["problem_type"]).strip(),
        str(doc["specific_type"]).strip(),
        _entries(doc.get("subdivisions"), "$.subdivisions"),
        _entries(doc.get("implicit_constraints"), "$.implicit_constraints"),
        provenance,
    )


def parse_structure(json_text: str, provenance: str = "distilled_from_description") -> ModelingStructure:
    try:
        doc = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON: {exc}", "MALFORMED_JSON") from exc
    return structure_from_dict(doc, provenance)


# ------------------------------------------------------------------------ diff


def words(text: str) -> frozenset[str]:
    return frozenset(_WORD.findall(text.lower()))


def jaccard(a: str, b: str) -> float:
    wa, wb = words(a), words(b)
    if not wa and not wb:
        return 1.0
    return len(wa & wb) / len(wa | wb)


def names_match(a: str, b: str) -> bool:
    return jaccard(a, b) >= MATCH_THRESHOLD


@dataclass(frozen=True)
class StructureDiff:
    missing_low_level: tuple[str, ...] = ()
    extra_low_level: tuple[str, ...] = ()
    level_mismatch: dict = field(default_factory=dict)  # level -> (reference, candidate)
    similarity: float = 1.0

    @property
    def identical(self) -> bool:
        return self.similarity == 1.0

    def render(self) -> str:
        if self.identical:
            return "The interpreted structure matches the reference structure."
        lines = []
        for level, (ref, cand) in self.level_mismatch.items():
            lines.append(f"{level} level differs: expected {ref!r}, model reads as {cand!r}.")
        if self.missing_low_level:
            lines.append("Missing from the model: " + "; ".join(self.missing_low_level) + ".")
        if self.extra_low_level:
            lines.append("Not in the reference structure: " + "; ".join(self.extra_low_level) + ".")
        lines.append(f"Similarity {self.similarity:.3f}.")
        return "\n".join(lines)


def _match(reference: list[str], candidate: list[str]) -> tuple[list[str], list[str], int]:
    """Greedy one-to-one matching in reference order; best Jaccard wins, earliest on ties."""
    used = [False] * len(candidate)
    missing = []
    matched = 0
    for name in reference:
        best, best_score = None, MATCH_THRESHOLD
        for j, cand in enumerate(candidate):
            if used[j]:
                continue
            score = jaccard(name, cand)
            if score >= best_score and (best is None or score > best_score):
                best, best_score = j, score
        if best is None:
            missing.append(name)
        else:
            used[best] = True
            matched += 1
    extra = [c for j, c in enumerate(candidate) if not used[j]]
    return missing, extra, matched


def structure_diff(reference: ModelingStructure, candidate: ModelingStructure) -> StructureDiff:
    missing, extra, matched = _match(reference.low_level, candidate.low_level)
    mismatch = {}
    if not names_match(reference.problem_type, candidate.problem_type):
        mismatch["high"] = (reference.problem_type, candidate.problem_type)
    if not names_match(reference.specific_type, candidate.specific_type):
        mismatch["medium"] = (reference.specific_type, candidate.specific_type)
    denom = max(len(reference.low_level), len(candidate.low_level), 1)
    ratio = matched / denom if (reference.low_level or candidate.low_level) else 1.0
    similarity = ratio * (LEVEL_PENALTY ** len(mismatch))
    return StructureDiff(tuple(missing), tuple(extra), mismatch, similarity)
