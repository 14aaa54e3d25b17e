"""Per-run event log shared by agents and the orchestrator."""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field

LLM_STAGES = ("distill", "formulate", "stru_interp", "stru_eval", "sol_interp", "sol_eval", "refine")
STEP_STAGES = ("compile", "solve")


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Event:
    seq: int
    stage: str
    kind: str  # llm | step
    started_at: float
    duration: float
    prompt_tokens: int = 0
    completion_tokens: int = 0
    estimated: bool = False
    request_fp: str = ""
    payload_digest: str = ""
    detail: str = ""

    @property
    def tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_json(self, include_time: bool = True) -> dict:
        out = {
            "seq": self.seq,
            "stage": self.stage,
            "kind": self.kind,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "estimated": self.estimated,
            "request_fp": self.request_fp,
            "payload_digest": self.payload_digest,
            "detail": self.detail,
        }
        if include_time:
            out["started_at"] = self.started_at
            out["duration"] = self.duration
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "Event":
        return cls(
            doc["seq"], doc["stage"], doc["kind"], doc.get("started_at", 0.0), doc.get("duration", 0.0),
            doc.get("prompt_tokens", 0), doc.get("completion_tokens", 0), doc.get("estimated", False),
            doc.get("request_fp", ""), doc.get("payload_digest", ""), doc.get("detail", ""),
        )


@dataclass
class EventLog:
    """Append-only, strictly ordered list of events for one run."""

    events: list[Event] = field(default_factory=list)
    clock: object = time.time

    def __post_init__(self):
        self._lock = threading.Lock()

    def _append(self, **kw) -> Event:
        with self._lock:
            event = Event(seq=len(self.events), **kw)
            self.events.append(event)
            return event

    def llm(self, stage: str, started_at: float, duration: float, prompt_tokens: int, completion_tokens: int,
            estimated: bool, request_fp: str, content: str, detail: str = "") -> Event:
        if stage not in LLM_STAGES:
            raise ValueError(f"unknown LLM stage {stage!r}")
        return self._append(
            stage=stage, kind="llm", started_at=started_at, duration=duration, prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens, estimated=estimated, request_fp=request_fp,
            payload_digest=digest(content), detail=detail,
        )

    def step(self, stage: str, started_at: float, duration: float, payload: str = "", detail: str = "") -> Event:
        if stage not in STEP_STAGES:
            raise ValueError(f"unknown step stage {stage!r}")
        return self._append(
            stage=stage, kind="step", started_at=started_at, duration=duration,
            payload_digest=digest(payload) if payload else "", detail=detail,
        )

    def now(self) -> float:
        return self.clock()

    def __len__(self) -> int:
        return len(self.events)

    def llm_events(self) -> list[Event]:
        return [e for e in self.events if e.kind == "llm"]
