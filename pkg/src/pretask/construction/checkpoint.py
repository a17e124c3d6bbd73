"""Checkpoint directory layout and atomic file writes."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import ConfigError, SchemaError
from ..memory import (
    ProposerMemory,
    SolverMemory,
    deserialize_proposer_memory,
    deserialize_solver_memory,
    serialize_memory,
)

SOLVER_FILE = "solver_memory.json"
PROPOSER_FILE = "proposer_memory.json"
RUNLOG_FILE = "runlog.jsonl"
CONFIG_FILE = "config.json"
CURSOR_FILE = "cursor.json"
ABORT_FILE = "abort.json"
PARTIAL_DIR = "partial"


def write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


@dataclass
class Cursor:
    """Position of the last completed iteration.

    ``task_index`` is the number of tasks finished inside ``iteration``;
    boundary checkpoints always have it equal to that iteration's batch size.
    """

    iteration: int
    task_index: int
    log_events: int
    gateway: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "iteration": self.iteration,
            "task_index": self.task_index,
            "log_events": self.log_events,
            "gateway": self.gateway,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Cursor:
        try:
            return cls(
                int(data["iteration"]),
                int(data["task_index"]),
                int(data["log_events"]),
                dict(data.get("gateway", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError("cursor", f"malformed cursor: {exc}") from exc


def write_memories(directory: Path, proposer: ProposerMemory, solver: SolverMemory) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    write_atomic(directory / SOLVER_FILE, serialize_memory(solver))
    write_atomic(directory / PROPOSER_FILE, serialize_memory(proposer))


def read_memories(directory: Path) -> tuple[ProposerMemory, SolverMemory]:
    directory = Path(directory)
    try:
        solver_text = (directory / SOLVER_FILE).read_text(encoding="utf-8")
        proposer_text = (directory / PROPOSER_FILE).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint memories in {directory}: {exc}") from exc
    return deserialize_proposer_memory(proposer_text), deserialize_solver_memory(solver_text)


def write_cursor(directory: Path, cursor: Cursor) -> None:
    write_atomic(directory / CURSOR_FILE, dump_json(cursor.to_dict()))


def read_cursor(directory: Path) -> Cursor | None:
    path = Path(directory) / CURSOR_FILE
    if not path.exists():
        return None
    try:
        return Cursor.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise SchemaError("cursor", f"not valid JSON: {exc}") from exc
