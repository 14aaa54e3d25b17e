"""Chat-completion access with token accounting and record/replay cassettes."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import httpx
from filelock import FileLock

from .errors import GatewayError, JsonExtractionError

log = logging.getLogger(__name__)

API_KEY_ENV = "OPTVERIFIER_API_KEY"
ROLES = ("system", "user", "assistant")
DEFAULT_BACKOFF = (0.5, 1.0, 2.0)
_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    model_name: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("a chat request needs at least one message")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    estimated: bool = False

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def to_json(self) -> dict:
        out = {"content": self.content, "prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens}
        if self.estimated:
            out["estimated"] = True
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "ChatResponse":
        return cls(
            str(doc["content"]),
            int(doc.get("prompt_tokens", 0)),
            int(doc.get("completion_tokens", 0)),
            bool(doc.get("estimated", False)),
        )


def _collapse(text: str) -> str:
    return _WS.sub(" ", text).strip()


def fingerprint(request: ChatRequest) -> str:
    """SHA-256 over model name and whitespace-collapsed messages; temperature and seed excluded."""
    canonical = json.dumps(
        {"model": request.model_name, "messages": [[m.role, _collapse(m.content)] for m in request.messages]},
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def describe_request(request: ChatRequest) -> str:
    last = request.messages[-1]
    return f"{last.role}: {last.content[:40]!r}"


# -------------------------------------------------------------------- cassette


class Cassette:
    """Ordered fingerprint -> response map backed by a JSON Lines file.

    Line format: ``{"fp": "<hex>", "response": {"content": ..., "prompt_tokens": N, "completion_tokens": M}}``.
    An optional first line ``{"meta": {...}}`` records the model name and date.
    """

    def __init__(self, entries: Iterable[tuple[str, ChatResponse]] = (), meta: dict | None = None, path=None):
        self.entries: "OrderedDict[str, ChatResponse]" = OrderedDict()
        for fp, resp in entries:
            self.entries.setdefault(fp, resp)
        self.meta = dict(meta or {})
        self.path = Path(path) if path is not None else None

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, fp: str) -> bool:
        return fp in self.entries

    def get(self, fp: str) -> ChatResponse | None:
        return self.entries.get(fp)

    @classmethod
    def load(cls, path) -> "Cassette":
        path = Path(path)
        entries, meta = [], {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    doc = json.loads(line)
                    if "meta" in doc:
                        meta = doc["meta"]
                        continue
                    entries.append((doc["fp"], ChatResponse.from_json(doc["response"])))
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise GatewayError(f"bad cassette line {lineno} in {path}: {exc}", "CASSETTE_ERROR") from exc
        return cls(entries, meta, path)

    def dump(self, path=None) -> None:
        path = Path(path or self.path)
        with open(path, "w", encoding="utf-8") as fh:
            if self.meta:
                fh.write(json.dumps({"meta": self.meta}, ensure_ascii=False) + "\n")
            for fp, resp in self.entries.items():
                fh.write(json.dumps({"fp": fp, "response": resp.to_json()}, ensure_ascii=False) + "\n")


# -------------------------------------------------------------------- backends


class Backend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


class TransientError(Exception):
    """Retryable transport failure raised by backends."""


class LiveBackend:
    """OpenAI-compatible ``/chat/completions`` endpoint."""

    def __init__(self, base_url: str, api_key: str | None = None, timeout: float = 120.0,
                 transport: httpx.BaseTransport | None = None):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout
        self.transport = transport

    def complete(self, request: ChatRequest) -> ChatResponse:
        if not self.api_key:
            raise GatewayError(f"no API key configured (set {API_KEY_ENV})", "AUTH_ERROR")
        payload = {
            "model": request.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        headers = {"Authorization": f"Bearer {self.api_key}"}
        try:
            with httpx.Client(timeout=self.timeout, transport=self.transport) as client:
                resp = client.post(f"{self.base_url}/chat/completions", json=payload, headers=headers)
        except httpx.TransportError as exc:
            raise TransientError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise GatewayError(f"provider rejected credentials ({resp.status_code})", "AUTH_ERROR")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:200]}", "TRANSPORT_ERROR")
        try:
            doc = resp.json()
            content = doc["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"unexpected response shape: {exc}", "TRANSPORT_ERROR") from exc
        usage = doc.get("usage") or {}
        if "prompt_tokens" in usage and "completion_tokens" in usage:
            return ChatResponse(content, int(usage["prompt_tokens"]), int(usage["completion_tokens"]))
        prompt_chars = "".join(m.content for m in request.messages)
        return ChatResponse(content, estimate_tokens(prompt_chars), estimate_tokens(content), estimated=True)


class ReplayBackend:
    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    def complete(self, request: ChatRequest) -> ChatResponse:
        resp = self.cassette.get(fingerprint(request))
        if resp is None:
            raise GatewayError(f"no recorded response for {describe_request(request)}", "REPLAY_MISS")
        return resp


class RecordingBackend:
    """Forwards to ``inner`` and appends each new exchange to a cassette file."""

    def __init__(self, inner: Backend, path, meta: dict | None = None):
        self.inner = inner
        self.path = Path(path)
        self._lock = threading.Lock()
        self._file_lock = FileLock(str(self.path) + ".lock")
        self.cassette = Cassette.load(self.path) if self.path.exists() else Cassette(meta=meta, path=self.path)
        if meta and not self.cassette.meta:
            self.cassette.meta = dict(meta)

    def complete(self, request: ChatRequest) -> ChatResponse:
        resp = self.inner.complete(request)
        fp = fingerprint(request)
        with self._lock, self._file_lock:
            if fp not in self.cassette:
                fresh = not self.path.exists() or self.path.stat().st_size == 0
                self.cassette.entries[fp] = resp
                with open(self.path, "a", encoding="utf-8") as fh:
                    if fresh and self.cassette.meta:
                        fh.write(json.dumps({"meta": self.cassette.meta}, ensure_ascii=False) + "\n")
                    fh.write(json.dumps({"fp": fp, "response": resp.to_json()}, ensure_ascii=False) + "\n")
        return resp


class SequenceBackend:
    """Returns scripted replies in order; useful for building cassettes."""

    def __init__(self, replies: Sequence[str | ChatResponse]):
        self.replies = list(replies)
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            if len(self.requests) >= len(self.replies):
                raise GatewayError(f"script exhausted at {describe_request(request)}", "REPLAY_MISS")
            reply = self.replies[len(self.requests)]
            self.requests.append(request)
        if isinstance(reply, ChatResponse):
            return reply
        prompt_chars = "".join(m.content for m in request.messages)
        return ChatResponse(reply, estimate_tokens(prompt_chars), estimate_tokens(reply), estimated=True)


class FunctionBackend:
    def __init__(self, fn: Callable[[ChatRequest], str]):
        self.fn = fn

    def complete(self, request: ChatRequest) -> ChatResponse:
        reply = self.fn(request)
        prompt_chars = "".join(m.content for m in request.messages)
        return ChatResponse(reply, estimate_tokens(prompt_chars), estimate_tokens(reply), estimated=True)


@dataclass
class GatewayConfig:
    base_url: str = "https://api.openai.com/v1"
    model_name: str = "gpt-4o-mini"
    temperature: float = 0.0
    max_retries: int = 3
    seed: int | None = None


class Gateway:
    """Provider-agnostic ``complete`` with retry/backoff on transient transport errors."""

    def __init__(self, backend: Backend, config: GatewayConfig | None = None,
                 backoff: Sequence[float] = DEFAULT_BACKOFF, sleep: Callable[[float], None] = time.sleep):
        self.backend = backend
        self.config = config or GatewayConfig()
        self.backoff = tuple(backoff)
        self.sleep = sleep

    def request(self, messages: Sequence[Message]) -> ChatRequest:
        return ChatRequest(self.config.model_name, tuple(messages), self.config.temperature, self.config.seed)

    def complete(self, request: ChatRequest) -> ChatResponse:
        attempts = self.config.max_retries + 1
        for attempt in range(attempts):
            try:
                return self.backend.complete(request)
            except TransientError as exc:
                if attempt == attempts - 1:
                    raise GatewayError(f"transport failed after {attempts} attempts: {exc}", "TRANSPORT_ERROR") from exc
                delay = self.backoff[min(attempt, len(self.backoff) - 1)] if self.backoff else 0.0
                log.warning("transient error (%s); retrying in %.1fs", exc, delay)
                self.sleep(delay)
        raise AssertionError("unreachable")


# ----------------------------------------------------------------- accounting


@dataclass(frozen=True)
class UsageRecord:
    stage: str
    prompt_tokens: int
    completion_tokens: int
    estimated: bool = False


@dataclass
class UsageTotals:
    calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    estimated: bool = False
    by_stage: dict = field(default_factory=dict)  # stage -> [calls, prompt, completion]

    @property
    def tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def as_tuple(self) -> tuple[int, int, int]:
        return self.calls, self.prompt_tokens, self.completion_tokens


def usage_totals(records: Iterable[UsageRecord]) -> UsageTotals:
    totals = UsageTotals()
    for r in records:
        totals.calls += 1
        totals.prompt_tokens += r.prompt_tokens
        totals.completion_tokens += r.completion_tokens
        totals.estimated = totals.estimated or r.estimated
        stage = totals.by_stage.setdefault(r.stage, [0, 0, 0])
        stage[0] += 1
        stage[1] += r.prompt_tokens
        stage[2] += r.completion_tokens
    return totals


# ------------------------------------------------------------ JSON extraction

_FENCE = re.compile(r"```json\s*\n?(.*?)```", re.DOTALL | re.IGNORECASE)


def _strip_trailing_commas(text: str) -> str:
    """Drop commas that directly precede ``}`` or ``]`` outside string literals (one pass)."""
    out = []
    in_str = escape = False
    i = 0
    while i < len(text):
        ch = text[i]
        if in_str:
            out.append(ch)
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
            out.append(ch)
        elif ch == ",":
            j = i + 1
            while j < len(text) and text[j] in " \t\r\n":
                j += 1
            if j >= len(text) or text[j] not in "}]":
                out.append(ch)
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def _loads_with_repair(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return json.loads(_strip_trailing_commas(text))


def _balanced_spans(text: str) -> list[tuple[int, int]]:
    spans = []
    for start, ch in enumerate(text):
        if ch not in "{[":
            continue
        stack = []
        in_str = escape = False
        for j in range(start, len(text)):
            c = text[j]
            if in_str:
                if escape:
                    escape = False
                elif c == "\\":
                    escape = True
                elif c == '"':
                    in_str = False
                continue
            if c == '"':
                in_str = True
            elif c in "{[":
                stack.append("}" if c == "{" else "]")
            elif c in "}]":
                if not stack or stack.pop() != c:
                    break
                if not stack:
                    spans.append((start, j + 1))
                    break
    return spans


def extract_json_block(text: str):
    """First well-formed fenced json block, else the largest brace-balanced substring."""
    for m in _FENCE.finditer(text):
        try:
            return _loads_with_repair(m.group(1).strip())
        except json.JSONDecodeError:
            continue
    spans = sorted(_balanced_spans(text), key=lambda s: (-(s[1] - s[0]), s[0]))
    for start, end in spans:
        try:
            return _loads_with_repair(text[start:end])
        except json.JSONDecodeError:
            continue
    raise JsonExtractionError("no JSON object found in the reply")
