from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path
from typing import Any, Callable, Iterable

EVENT_KINDS = (
    "task_proposed",
    "task_executed",
    "verdict",
    "proposer_update",
    "solver_update",
    "skipped",
    "parse_warning",
    "cost",
)


def _line(event: dict[str, Any]) -> str:
    return json.dumps(event, ensure_ascii=False, sort_keys=True)


class RunLog:
    """Append-only, totally ordered event log, optionally mirrored to a JSONL file."""

    def __init__(self, path: str | os.PathLike | None = None, clock: Callable[[], float] = time.time):
        self.path = Path(path) if path is not None else None
        self.clock = clock
        self.events: list[dict[str, Any]] = []
        self._lock = threading.Lock()

    def emit(self, kind: str, **payload: Any) -> dict[str, Any]:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        with self._lock:
            event = {"seq": len(self.events), "ts": self.clock(), "kind": kind, "payload": payload}
            self.events.append(event)
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(_line(event) + "\n")
        return event

    def of_kind(self, kind: str) -> list[dict[str, Any]]:
        return [e for e in self.events if e["kind"] == kind]

    def to_jsonl(self, normalized: bool = False) -> str:
        events = normalize_events(self.events) if normalized else self.events
        return "".join(_line(e) + "\n" for e in events)

    def attach(self, path: str | os.PathLike) -> None:
        """Mirror to ``path`` from now on, rewriting it with the events so far."""
        self.path = Path(path)
        self.path.write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | os.PathLike, limit: int | None = None) -> RunLog:
        """Read a JSONL log, keeping the first ``limit`` events (all when None)."""
        log = cls()
        path = Path(path)
        if path.exists():
            with path.open(encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        log.events.append(json.loads(line))
        if limit is not None:
            log.events = log.events[:limit]
        return log


def normalize_events(events: Iterable[dict[str, Any]]) -> list[dict[str, Any]]:
    """Copies of ``events`` with timestamps zeroed, for run-to-run comparison."""
    return [{**e, "ts": 0} for e in events]
