"""Text-completion providers: a scripted one for tests and an HTTP client."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Protocol

import httpx

logger = logging.getLogger(__name__)


class Tag(str, Enum):
    SCHEMA = "schema"
    ANSWER = "answer"
    HYPOTHESIS = "hypothesis"
    PATH_SCORE = "path_score"


class ProviderError(RuntimeError):
    def __init__(self, message: str, retries: int = 0):
        self.retries = retries
        super().__init__(message)


class ScriptExhaustedError(ProviderError):
    pass


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    tag: Tag
    max_tokens: int = 256
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        object.__setattr__(self, "tag", Tag(self.tag))


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    provider_name: str


class Provider(Protocol):
    name: str

    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


def complete(provider: Provider, request: CompletionRequest) -> CompletionResponse:
    return provider.complete(request)


@dataclass
class _Route:
    tag: Tag
    contains: tuple[str, ...]
    responses: deque[str]


@dataclass
class ScriptedProvider:
    """Replays canned responses.

    Routes are checked first: a route matches when its tag equals the
    request tag and every ``contains`` string occurs in the prompt; the
    first non-empty matching route answers. Otherwise the per-tag FIFO
    queue answers, then ``default``.
    """

    responses: dict[str, list[str]] = field(default_factory=dict)
    default: str | None = None
    routes: list[dict[str, Any]] = field(default_factory=list)
    name: str = "scripted"

    def __post_init__(self) -> None:
        self._lock = threading.Lock()
        self._queues = {Tag(t): deque(v) for t, v in self.responses.items()}
        self._routes = [
            _Route(Tag(r["tag"]), tuple(r.get("contains", ())), deque(r.get("responses", ())))
            for r in self.routes
        ]
        self.calls: list[CompletionRequest] = []

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> ScriptedProvider:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ScriptedProvider:
        unknown = set(data) - {"responses", "default", "routes"}
        if unknown:
            raise ValueError(f"unknown script keys: {sorted(unknown)}")
        return cls(
            responses=dict(data.get("responses", {})),
            default=data.get("default"),
            routes=list(data.get("routes", [])),
        )

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._lock:
            self.calls.append(request)
            for route in self._routes:
                if route.tag is request.tag and route.responses and all(s in request.prompt for s in route.contains):
                    return CompletionResponse(route.responses.popleft(), self.name)
            queue = self._queues.get(request.tag)
            if queue:
                return CompletionResponse(queue.popleft(), self.name)
            if self.default is not None:
                return CompletionResponse(self.default, self.name)
        raise ScriptExhaustedError(f"script exhausted for tag {request.tag.value!r}")


@dataclass
class HttpProvider:
    """POSTs ``{"prompt", "max_tokens", "temperature"}`` and reads ``{"text"}``."""

    url: str
    token: str | None = None
    retries: int = 2
    backoff: float = 0.5
    timeout: float = 30.0
    name: str = "http"
    transport: httpx.BaseTransport | None = None

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        payload = {"prompt": request.prompt, "max_tokens": request.max_tokens, "temperature": request.temperature}
        last_error = "no attempt made"
        with httpx.Client(timeout=self.timeout, transport=self.transport) as client:
            for attempt in range(self.retries + 1):
                if attempt:
                    time.sleep(self.backoff * 2 ** (attempt - 1))
                try:
                    resp = client.post(self.url, json=payload, headers=headers)
                except httpx.HTTPError as exc:
                    last_error = f"transport failure: {exc}"
                else:
                    if resp.status_code != 200:
                        last_error = f"HTTP {resp.status_code}"
                    else:
                        try:
                            body = resp.json()
                        except ValueError:
                            body = None
                        if isinstance(body, dict) and isinstance(body.get("text"), str):
                            return CompletionResponse(body["text"], self.name)
                        last_error = "malformed response body"
                logger.warning("provider call failed (attempt %d): %s", attempt + 1, last_error)
        raise ProviderError(f"{last_error} after {self.retries} retries", retries=self.retries)


def provider_from_spec(spec: str, token_env: str = "KGREASON_API_TOKEN", retries: int = 2) -> Provider:
    """Build a provider from ``scripted:<file>``, ``http:<url>`` or ``none``."""
    kind, _, arg = spec.partition(":")
    if kind == "scripted" and arg:
        return ScriptedProvider.from_file(arg)
    if kind == "http" and arg:
        return HttpProvider(arg, token=os.environ.get(token_env), retries=retries)
    if kind == "none" and not arg:
        return ScriptedProvider(name="none")
    raise ValueError(f"bad provider spec {spec!r}; use scripted:<file>, http:<url> or none")
