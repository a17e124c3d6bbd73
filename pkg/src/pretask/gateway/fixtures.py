"""Builder for scripted-backend fixture files (JSON Lines)."""

from __future__ import annotations

import json
import os
from typing import Any, Sequence

from .backends import ScriptedBackend, fixture_entry_from_dict
from .types import ROLES, TokenUsage


class FixtureScript:
    """Append responses role by role; indices are assigned in call order per role."""

    def __init__(self) -> None:
        self.counters: dict[str, int] = {r: 0 for r in ROLES}
        self.entries: list[dict[str, Any]] = []

    def add(
        self,
        role: str,
        text: str | dict | list,
        usage: TokenUsage | None = None,
        branches: Sequence[tuple[str, str | dict | list]] = (),
    ) -> int:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        index = self.counters[role]
        self.counters[role] += 1
        entry: dict[str, Any] = {"role": role, "index": index, "text": _as_text(text)}
        if usage is not None:
            entry["usage"] = usage.to_dict()
        if branches:
            entry["branches"] = [{"contains": c, "text": _as_text(t)} for c, t in branches]
        self.entries.append(entry)
        return index

    def snapshot(self) -> dict[str, int]:
        return dict(self.counters)

    def lines(self, upto: dict[str, int] | None = None) -> list[str]:
        """JSONL lines, optionally only entries whose index is below ``upto[role]``."""
        keep = self.entries
        if upto is not None:
            keep = [e for e in keep if e["index"] < upto.get(e["role"], 0)]
        return [json.dumps(e, ensure_ascii=False, sort_keys=True) for e in keep]

    def write(self, path: str | os.PathLike, upto: dict[str, int] | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.lines(upto):
                fh.write(line + "\n")

    def backend(self) -> ScriptedBackend:
        return ScriptedBackend(fixture_entry_from_dict(e) for e in self.entries)


def _as_text(value: str | dict | list) -> str:
    return value if isinstance(value, str) else json.dumps(value, ensure_ascii=False)
