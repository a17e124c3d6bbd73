"""Text-completion backends: scripted replay, plain callables, and a live HTTP client."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol

import httpx

from ..errors import BackendError, ConfigError, FixtureMissError, TransportError
from .types import ModelRequest, ModelResponse, TokenUsage


class Backend(Protocol):
    def generate(self, request: ModelRequest) -> ModelResponse:
        """Return the completion for ``request``; raise TransportError if the call may be retried."""


@dataclass(frozen=True)
class FixtureBranch:
    contains: str
    text: str
    usage: TokenUsage = field(default_factory=TokenUsage)


@dataclass(frozen=True)
class FixtureEntry:
    role: str
    index: int
    text: str
    usage: TokenUsage = field(default_factory=TokenUsage)
    branches: tuple[FixtureBranch, ...] = ()

    def select(self, prompt: str) -> ModelResponse:
        for branch in self.branches:
            if branch.contains in prompt:
                return ModelResponse(branch.text, branch.usage)
        return ModelResponse(self.text, self.usage)


def fixture_entry_from_dict(obj: Mapping[str, Any]) -> FixtureEntry:
    branches = tuple(
        FixtureBranch(b["contains"], b["text"], TokenUsage.from_dict(b.get("usage")))
        for b in obj.get("branches") or ()
    )
    return FixtureEntry(
        role=obj["role"],
        index=int(obj["index"]),
        text=obj["text"],
        usage=TokenUsage.from_dict(obj.get("usage")),
        branches=branches,
    )


class ScriptedBackend:
    """Replays responses keyed by (role, per-role request index).

    An entry may carry ``branches``: ``[{"contains": ..., "text": ...}]``. The
    first branch whose ``contains`` string occurs in the prompt wins; otherwise
    the entry's own ``text`` is returned.
    """

    def __init__(self, entries: Iterable[FixtureEntry]):
        self.entries: dict[tuple[str, int], FixtureEntry] = {}
        for entry in entries:
            self.entries[(entry.role, entry.index)] = entry

    @classmethod
    def from_jsonl(cls, path: str | os.PathLike) -> ScriptedBackend:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"fixture file not found: {path}")
        entries = []
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    entries.append(fixture_entry_from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ConfigError(f"{path}:{lineno}: bad fixture line ({exc})") from exc
        return cls(entries)

    def generate(self, request: ModelRequest) -> ModelResponse:
        entry = self.entries.get((request.role, request.request_index))
        if entry is None:
            raise FixtureMissError(request.role, request.request_index)
        return entry.select(request.prompt)


class CallableBackend:
    """Adapts ``fn(request) -> str | ModelResponse``; handy for tests and local stubs."""

    def __init__(self, fn: Callable[[ModelRequest], str | ModelResponse]):
        self.fn = fn

    def generate(self, request: ModelRequest) -> ModelResponse:
        out = self.fn(request)
        return out if isinstance(out, ModelResponse) else ModelResponse(out)


def _usage_from_payload(usage: Mapping[str, Any] | None) -> TokenUsage:
    if not usage:
        return TokenUsage()
    output = int(usage.get("completion_tokens", 0) or 0)
    if "prompt_cache_hit_tokens" in usage or "prompt_cache_miss_tokens" in usage:
        hit = int(usage.get("prompt_cache_hit_tokens", 0) or 0)
        miss = int(usage.get("prompt_cache_miss_tokens", 0) or 0)
        return TokenUsage(hit, miss, output)
    prompt = int(usage.get("prompt_tokens", 0) or 0)
    details = usage.get("prompt_tokens_details") or {}
    hit = int(details.get("cached_tokens", 0) or 0)
    return TokenUsage(hit, max(prompt - hit, 0), output)


class HttpBackend:
    """OpenAI-compatible chat-completions client."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        token_env: str = "PRETASK_API_TOKEN",
        temperatures: Mapping[str, float] | None = None,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.token_env = token_env
        self.temperatures = dict(temperatures or {})
        self.client = client or httpx.Client(timeout=timeout)

    def generate(self, request: ModelRequest) -> ModelResponse:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": self.temperatures.get(request.role, request.temperature),
        }
        try:
            resp = self.client.post(self.endpoint, json=body, headers=headers)
        except httpx.TransportError as exc:
            raise TransportError(f"transport failure: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code} from {self.endpoint}")
        if resp.status_code >= 400:
            raise BackendError(f"HTTP {resp.status_code} from {self.endpoint}: {resp.text[:200]}")
        try:
            payload = resp.json()
            text = payload["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"unexpected response shape from {self.endpoint}") from exc
        return ModelResponse(text, _usage_from_payload(payload.get("usage")))
