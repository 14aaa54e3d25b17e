"""Prompt template sets and their rendering.

A template set is a directory of ``.txt`` fragments.  Each stage joins
fragments into role-tagged turns; assistant turns are plain placeholders
that carry earlier replies of the same conversation.  ``{name}`` is a
placeholder, ``{{`` and ``}}`` are literal braces, and any other brace is
left as written.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib.resources import files

from .. import dsl
from ..gateway import Message

PROMPT_SETS = ("dsl", "latex")
_PLACEHOLDER = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}")

# stage -> [(role, fragment names or a bare "{placeholder}")]
STAGE_LAYOUT: dict[str, list[tuple[str, tuple[str, ...] | str]]] = {
    "distill": [
        ("system", ("interpretation_0",)),
        ("user", ("interpretation_1", "interpretation_2", "interpretation_3", "interpretation_4")),
    ],
    "formulate_params": [
        ("system", ("formulation_0",)),
        ("user", ("formulation_1", "formulation_2")),
    ],
    "formulate_model": [
        ("system", ("formulation_0",)),
        ("user", ("formulation_1", "formulation_2")),
        ("assistant", "{parameters_reply}"),
        ("user", ("formulation_3", "formulation_4", "model_format")),
    ],
    "stru_interp": [
        ("system", ("interpretation_0",)),
        ("user", ("stru_interp", "interpretation_4")),
    ],
    "stru_eval": [
        ("system", ("modification_0",)),
        ("user", ("modification_1",)),
    ],
    "sol_interp": [
        ("system", ("solution_0",)),
        ("user", ("solution_1",)),
    ],
    "sol_eval": [
        ("system", ("solution_0",)),
        ("user", ("solution_1",)),
        ("assistant", "{narrative}"),
        ("user", ("solution_2", "feasibility_context")),
    ],
    "refine": [
        ("system", ("modification_0",)),
        ("user", ("modification_1",)),
        ("assistant", "{comment}"),
        ("user", ("modification_2", "refine_context", "model_format")),
    ],
    "refine_solution": [
        ("system", ("solution_0",)),
        ("user", ("solution_1",)),
        ("assistant", "{narrative}"),
        ("user", ("solution_2", "feasibility_context")),
        ("assistant", "{comment}"),
        ("user", ("solution_3", "refine_context", "model_format")),
    ],
    "refine_check": [
        ("system", ("modification_0",)),
        ("user", ("check_comment", "modification_2", "refine_context", "model_format")),
    ],
}


class TemplateError(ValueError):
    pass


def placeholders(text: str) -> set[str]:
    return {m.group(1) for m in _PLACEHOLDER.finditer(text) if m.group(1)}


def render_text(text: str, values: dict[str, str]) -> str:
    def sub(m: re.Match) -> str:
        token = m.group(0)
        if token == "{{":
            return "{"
        if token == "}}":
            return "}"
        name = m.group(1)
        if name not in values:
            raise TemplateError(f"no value supplied for placeholder {{{name}}}")
        return str(values[name])

    return _PLACEHOLDER.sub(sub, text)


@dataclass(frozen=True)
class PromptTemplate:
    stage: str
    turns: tuple[tuple[str, str], ...]  # (role, template text)

    def placeholders(self) -> set[str]:
        out: set[str] = set()
        for _, text in self.turns:
            out |= placeholders(text)
        return out

    def render(self, **values: str) -> list[Message]:
        values.setdefault("grammar", dsl.GRAMMAR)
        return [Message(role, render_text(text, values)) for role, text in self.turns]


@lru_cache(maxsize=None)
def fragment(prompt_set: str, name: str) -> str:
    if prompt_set not in PROMPT_SETS:
        raise TemplateError(f"unknown prompt set {prompt_set!r}; choose from {PROMPT_SETS}")
    return (files("optverifier.agents") / "templates" / prompt_set / f"{name}.txt").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def template(prompt_set: str, stage: str) -> PromptTemplate:
    if stage not in STAGE_LAYOUT:
        raise TemplateError(f"unknown stage {stage!r}")
    turns = []
    for role, parts in STAGE_LAYOUT[stage]:
        text = parts if isinstance(parts, str) else "".join(fragment(prompt_set, p) for p in parts)
        turns.append((role, text))
    return PromptTemplate(stage, tuple(turns))


def reask_message(prompt_set: str, problem: str) -> Message:
    return Message("user", render_text(fragment(prompt_set, "reask"), {"comment": problem}))
