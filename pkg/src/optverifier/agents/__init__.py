"""Agent operations: LLM-backed and deterministic mock implementations."""

from .base import (
    Agents,
    RefineContext,
    SolutionContext,
    SolutionNarrative,
    Verdict,
    first_token_is_yes,
    formulation_text,
    score_reply,
    solution_text,
)
from .llm import LLMAgents
from .mock import MockAgents, mock_interpret
from .prompts import PROMPT_SETS, PromptTemplate, template

__all__ = [
    "Agents", "RefineContext", "SolutionContext", "SolutionNarrative", "Verdict", "first_token_is_yes",
    "formulation_text", "score_reply", "solution_text", "LLMAgents", "MockAgents", "mock_interpret",
    "PROMPT_SETS", "PromptTemplate", "template",
]
