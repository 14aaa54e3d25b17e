"""JSON Lines benchmark datasets: one problem instance per line."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import BenchError
from ..model_ir import ProblemInstance

KNOWN_KEYS = ("id", "description", "ground_truth_objective", "difficulty", "category")


def parse_instance(doc, where: str) -> ProblemInstance:
    if not isinstance(doc, dict):
        raise BenchError(f"{where}: expected a JSON object", "MALFORMED_LINE")
    if not isinstance(doc.get("description"), str) or not doc["description"].strip():
        raise BenchError(f"{where}: missing or empty 'description'", "MALFORMED_LINE")
    if "id" not in doc:
        raise BenchError(f"{where}: missing 'id'", "MALFORMED_LINE")
    truth = doc.get("ground_truth_objective")
    if truth is not None and (isinstance(truth, bool) or not isinstance(truth, (int, float))):
        raise BenchError(f"{where}: ground_truth_objective must be a number", "MALFORMED_LINE")
    return ProblemInstance(
        str(doc["id"]), doc["description"], None if truth is None else float(truth),
        doc.get("difficulty"), doc.get("category"),
    )


def load_dataset(path) -> list[ProblemInstance]:
    """Read instances; blank lines are skipped, anything else malformed raises MALFORMED_LINE."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BenchError(f"cannot read dataset {path}: {exc.strerror}", "DATASET_NOT_FOUND") from None
    out = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        where = f"{path.name} line {lineno}"
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BenchError(f"{where}: {exc.msg}", "MALFORMED_LINE") from None
        instance = parse_instance(doc, where)
        if instance.id in seen:
            raise BenchError(f"{where}: duplicate id {instance.id!r}", "MALFORMED_LINE")
        seen.add(instance.id)
        out.append(instance)
    return out
