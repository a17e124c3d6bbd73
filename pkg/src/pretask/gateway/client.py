from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, replace
from typing import Callable

from ..errors import BackendError, TransportError
from .backends import Backend
from .types import ROLES, ModelRequest, ModelResponse, TokenUsage

logger = logging.getLogger(__name__)

PHASES = ("construction", "evaluation")


@dataclass(frozen=True)
class CallRecord:
    role: str
    index: int
    temperature: float
    phase: str
    prompt: str
    text: str
    usage: TokenUsage


class Gateway:
    """Sends requests to a backend, stamps per-role indices, retries transport errors,
    and keeps a token ledger keyed by (phase, role).

    Only ``TransportError`` is retried. Parse failures never reach this layer,
    so replaying a fixture file always yields the same response sequence.
    """

    def __init__(
        self,
        backend: Backend,
        retry_limit: int = 3,
        backoff_base: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
        listener: Callable[[CallRecord], None] | None = None,
        keep_history: bool = True,
    ):
        self.backend = backend
        self.retry_limit = retry_limit
        self.backoff_base = backoff_base
        self.sleep = sleep
        self.listener = listener
        self.keep_history = keep_history
        self.phase = "construction"
        self.counters: dict[str, int] = {r: 0 for r in ROLES}
        self.ledger: dict[tuple[str, str], TokenUsage] = {}
        self.history: list[CallRecord] = []
        self._lock = threading.Lock()

    def complete(self, request: ModelRequest) -> ModelResponse:
        with self._lock:
            index = self.counters[request.role]
            self.counters[request.role] = index + 1
            phase = self.phase
        request = replace(request, request_index=index)
        attempt = 0
        while True:
            try:
                response = self.backend.generate(request)
                break
            except TransportError as exc:
                if attempt >= self.retry_limit:
                    raise BackendError(
                        f"{request.role}#{index}: retries exhausted after {attempt + 1} attempts: {exc}"
                    ) from exc
                delay = self.backoff_base * (2**attempt)
                logger.warning("%s#%d transport error (%s); retrying in %.1fs", request.role, index, exc, delay)
                self.sleep(delay)
                attempt += 1
        record = CallRecord(
            role=request.role,
            index=index,
            temperature=request.temperature,
            phase=phase,
            prompt=request.prompt,
            text=response.text,
            usage=response.usage,
        )
        with self._lock:
            key = (phase, request.role)
            self.ledger[key] = self.ledger.get(key, TokenUsage()) + response.usage
            if self.keep_history:
                self.history.append(record)
        if self.listener is not None:
            self.listener(record)
        return response

    def prompts(self, role: str) -> list[str]:
        return [c.prompt for c in self.history if c.role == role]

    def state(self) -> dict:
        """Counters and ledger, for checkpoints."""
        return {
            "counters": dict(self.counters),
            "ledger": [
                {"phase": p, "role": r, **u.to_dict()} for (p, r), u in sorted(self.ledger.items())
            ],
        }

    def restore(self, state: dict) -> None:
        self.counters = {r: int(state.get("counters", {}).get(r, 0)) for r in ROLES}
        self.ledger = {
            (row["phase"], row["role"]): TokenUsage.from_dict(row) for row in state.get("ledger", [])
        }
