"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (e.g. ``"REPLAY_MISS"``)
so callers and the run record can branch on it without parsing messages.
"""

from __future__ import annotations


class OptVerifierError(Exception):
    code = "ERROR"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.message = message

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ModelFormatError(OptVerifierError):
    """Raised for MALFORMED_JSON / SCHEMA_ERROR while reading model or structure JSON."""


class DslError(OptVerifierError):
    """Formulation text failed to parse or violates linearity/binding rules."""

    def __init__(self, message: str, code: str, line: int | None = None, column: int | None = None):
        super().__init__(message, code)
        self.line = line
        self.column = column

    def __str__(self) -> str:
        if self.line is None:
            return f"{self.code}: {self.message}"
        return f"{self.code} at {self.line}:{self.column}: {self.message}"


class GatewayError(OptVerifierError):
    """TRANSPORT_ERROR, REPLAY_MISS, AUTH_ERROR."""


class JsonExtractionError(OptVerifierError):
    code = "NO_JSON_FOUND"


class AgentError(OptVerifierError):
    code = "AGENT_OUTPUT_INVALID"


class CompileError(OptVerifierError):
    """Grounding / LP emission failures (UNBOUND_PARAMETER, INDEX_OUT_OF_RANGE, NAME_COLLISION, ...)."""


class SolverError(OptVerifierError):
    """SOLVER_NOT_FOUND, SOLVER_PARSE_ERROR, TIMEOUT, ORACLE_INAPPLICABLE."""


class DataBindingError(OptVerifierError):
    """SHAPE_MISMATCH, MISSING_COLUMN, NO_EXTERNAL_PARAMETERS, missing data file."""


class BenchError(OptVerifierError):
    """MALFORMED_LINE, PERTURBATION_EXHAUSTED, TOO_LARGE."""


class ConfigError(OptVerifierError):
    code = "CONFIG_ERROR"
