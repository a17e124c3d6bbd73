"""Solver and proposer memory values, prompt rendering, and canonical JSON I/O.

Both memories are immutable snapshots: every operation here returns a new
value and never mutates its input.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Iterator, Mapping

import jsonschema

from .errors import SchemaError

SECTIONS: tuple[str, ...] = ("strategies", "code_snippets", "pitfalls")
OUTCOMES: tuple[str, ...] = ("solved", "failed", "infeasible")
TAGS: tuple[str, ...] = ("helpful", "harmful", "neutral")
DOCUMENT_VERSION = 1

_COUNTER_PATTERN = r"(?:\d{5}|[1-9]\d{5,})"
BULLET_ID_RE = re.compile(rf"^({'|'.join(SECTIONS)})-({_COUNTER_PATTERN})$")

ENV_INFO_HEADER = "## Environment Information"
TASK_HISTORY_HEADER = "## Prior Task History"


@dataclass(frozen=True)
class PlaybookBullet:
    id: str
    section: str
    content: str
    helpful: int = 0
    harmful: int = 0

    def render(self) -> str:
        return f"[{self.id}] helpful={self.helpful} harmful={self.harmful} :: {self.content}"


@dataclass(frozen=True)
class SolverMemory:
    """The deployment-facing playbook.

    ``next_counter[s]`` is the counter the next bullet in section ``s`` will
    receive; it only ever grows, so ids are never reused.
    """

    sections: Mapping[str, tuple[PlaybookBullet, ...]] = field(
        default_factory=lambda: {s: () for s in SECTIONS}
    )
    next_counter: Mapping[str, int] = field(default_factory=lambda: {s: 1 for s in SECTIONS})

    @classmethod
    def empty(cls) -> SolverMemory:
        return cls()

    def bullets(self) -> Iterator[PlaybookBullet]:
        for section in SECTIONS:
            yield from self.sections[section]

    def get(self, bullet_id: str) -> PlaybookBullet | None:
        for bullet in self.bullets():
            if bullet.id == bullet_id:
                return bullet
        return None

    def __len__(self) -> int:
        return sum(len(self.sections[s]) for s in SECTIONS)


@dataclass(frozen=True)
class PracticeRecord:
    task_id: str
    iteration: int
    instruction: str
    outcome: str
    invoked_tools: tuple[str, ...] = ()
    reason: str = ""

    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")
        # set semantics, canonical order
        object.__setattr__(self, "invoked_tools", tuple(sorted(set(self.invoked_tools))))


@dataclass(frozen=True)
class UsageStats:
    app_counts: Mapping[str, int] = field(default_factory=dict)
    tool_counts: Mapping[str, int] = field(default_factory=dict)

    def merged(self, tool_calls: Iterable[str]) -> UsageStats:
        """Return new stats with every call in ``tool_calls`` counted once."""
        tools = Counter(self.tool_counts)
        apps = Counter(self.app_counts)
        for tool in tool_calls:
            tools[tool] += 1
            apps[app_of(tool)] += 1
        return UsageStats(dict(sorted(apps.items())), dict(sorted(tools.items())))


@dataclass(frozen=True)
class EnvObservation:
    index: int
    source_task_id: str
    lines: tuple[str, ...]


@dataclass(frozen=True)
class ProposerMemory:
    records: tuple[PracticeRecord, ...] = ()
    usage: UsageStats = field(default_factory=UsageStats)
    observations: tuple[EnvObservation, ...] = ()

    @classmethod
    def empty(cls) -> ProposerMemory:
        return cls()


@dataclass(frozen=True)
class ContextLimits:
    """Windowing for the proposer context rendering."""

    history_window: int = 50
    max_solved: int = 10
    max_failed: int = 5
    max_infeasible: int = 5
    max_observations: int = 20


def app_of(tool_id: str) -> str:
    return tool_id.split(".", 1)[0]


# --------------------------------------------------------------------- solver


def assign_bullet_id(memory: SolverMemory, section: str) -> tuple[str, SolverMemory]:
    """Issue the next id for ``section``; returns the id and the advanced memory."""
    if section not in SECTIONS:
        raise ValueError(f"unknown playbook section {section!r}")
    counter = memory.next_counter[section]
    counters = dict(memory.next_counter)
    counters[section] = counter + 1
    return f"{section}-{counter:05d}", replace(memory, next_counter=counters)


def add_bullet(memory: SolverMemory, section: str, content: str) -> tuple[PlaybookBullet, SolverMemory]:
    bullet_id, memory = assign_bullet_id(memory, section)
    bullet = PlaybookBullet(id=bullet_id, section=section, content=content)
    sections = dict(memory.sections)
    sections[section] = sections[section] + (bullet,)
    return bullet, replace(memory, sections=sections)


def apply_tag_updates(
    memory: SolverMemory, tags: Mapping[str, str]
) -> tuple[SolverMemory, list[str]]:
    """Bump helpful/harmful counters; ids missing from the playbook are returned, not raised."""
    unknown: list[str] = []
    bumps: dict[str, tuple[int, int]] = {}
    known = {b.id for b in memory.bullets()}
    for bullet_id, tag in tags.items():
        if bullet_id not in known:
            unknown.append(bullet_id)
            continue
        h, k = bumps.get(bullet_id, (0, 0))
        if tag == "helpful":
            h += 1
        elif tag == "harmful":
            k += 1
        bumps[bullet_id] = (h, k)
    if not any(h or k for h, k in bumps.values()):
        return memory, unknown
    sections = {}
    for section in SECTIONS:
        updated = []
        for bullet in memory.sections[section]:
            h, k = bumps.get(bullet.id, (0, 0))
            if h or k:
                bullet = replace(bullet, helpful=bullet.helpful + h, harmful=bullet.harmful + k)
            updated.append(bullet)
        sections[section] = tuple(updated)
    return replace(memory, sections=sections), unknown


def render_playbook(memory: SolverMemory) -> str:
    lines: list[str] = []
    for section in SECTIONS:
        lines.append(f"## {section}")
        lines.extend(b.render() for b in memory.sections[section])
    return "\n".join(lines)


# ------------------------------------------------------------------- proposer


def _one_line(text: str) -> str:
    return " ".join(text.split())


def _usage_lines(records: Iterable[PracticeRecord]) -> tuple[str, str]:
    tools: Counter[str] = Counter()
    for record in records:
        tools.update(record.invoked_tools)
    apps: Counter[str] = Counter()
    for tool, count in tools.items():
        apps[app_of(tool)] += count

    def fmt(counts: Counter[str]) -> str:
        if not counts:
            return "none"
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return ", ".join(f"{name}:{count}" for name, count in ranked)

    return fmt(apps), fmt(tools)


def window_usage(memory: ProposerMemory, history_window: int) -> Counter[str]:
    """Per-tool presence counts over the most recent ``history_window`` records."""
    counts: Counter[str] = Counter()
    recent = memory.records[-history_window:] if history_window > 0 else ()
    for record in recent:
        counts.update(record.invoked_tools)
    return counts


def render_proposer_context(memory: ProposerMemory, limits: ContextLimits | None = None) -> str:
    limits = limits or ContextLimits()
    out: list[str] = [ENV_INFO_HEADER]
    observations = memory.observations[-limits.max_observations:] if limits.max_observations > 0 else ()
    if not observations:
        out.append("none")
    for obs in observations:
        out.append(f"Observation {obs.index}:")
        out.extend(f"  - {line}" for line in obs.lines)

    out.append("")
    out.append(TASK_HISTORY_HEADER)
    recent = memory.records[-limits.history_window:] if limits.history_window > 0 else ()
    app_line, api_line = _usage_lines(recent)
    out.append(f"Recently overused apps: {app_line}")
    out.append(f"Recently overused APIs: {api_line}")

    groups = (
        ("Solved tasks (excerpt):", "solved", limits.max_solved),
        ("Failure tasks (excerpt):", "failed", limits.max_failed),
        ("Infeasible tasks (excerpt):", "infeasible", limits.max_infeasible),
    )
    for title, outcome, cap in groups:
        out.append("")
        out.append(title)
        matching = [r for r in memory.records if r.outcome == outcome]
        chosen = matching[-cap:] if cap > 0 else []
        if not chosen:
            out.append("- none")
        for record in chosen:
            out.append(f"- {_one_line(record.instruction)}")
            used = ", ".join(record.invoked_tools) or "none"
            out.append(f"  used_apis={used}")
            if outcome != "solved" and record.reason:
                out.append(f"  reason: {_one_line(record.reason)}")
    return "\n".join(out)


def split_proposer_context(text: str) -> tuple[str, str]:
    """Split rendered proposer context into (environment info body, task history body)."""
    if not text.strip():
        return "", ""
    env_part, _, history_part = text.partition(TASK_HISTORY_HEADER)
    env_body = env_part.replace(ENV_INFO_HEADER, "", 1).strip("\n")
    return env_body, history_part.strip("\n")


# -------------------------------------------------------------- serialization

_BULLET_SCHEMA = {
    "type": "object",
    "required": ["id", "content", "helpful", "harmful"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string", "pattern": BULLET_ID_RE.pattern},
        "content": {"type": "string", "minLength": 1},
        "helpful": {"type": "integer", "minimum": 0},
        "harmful": {"type": "integer", "minimum": 0},
    },
}

SOLVER_SCHEMA = {
    "type": "object",
    "required": ["version", "sections", "next_counter"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": DOCUMENT_VERSION},
        "sections": {
            "type": "object",
            "required": list(SECTIONS),
            "additionalProperties": False,
            "properties": {s: {"type": "array", "items": _BULLET_SCHEMA} for s in SECTIONS},
        },
        "next_counter": {
            "type": "object",
            "required": list(SECTIONS),
            "additionalProperties": False,
            "properties": {s: {"type": "integer", "minimum": 1} for s in SECTIONS},
        },
    },
}

_COUNT_MAP = {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}}

PROPOSER_SCHEMA = {
    "type": "object",
    "required": ["version", "records", "usage", "observations"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": DOCUMENT_VERSION},
        "records": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["task_id", "iteration", "instruction", "outcome", "invoked_tools", "reason"],
                "additionalProperties": False,
                "properties": {
                    "task_id": {"type": "string", "minLength": 1},
                    # iteration 0 marks records seeded from solved example tasks
                    "iteration": {"type": "integer", "minimum": 0},
                    "instruction": {"type": "string"},
                    "outcome": {"enum": list(OUTCOMES)},
                    "invoked_tools": {"type": "array", "items": {"type": "string"}},
                    "reason": {"type": "string"},
                },
            },
        },
        "usage": {
            "type": "object",
            "required": ["app_counts", "tool_counts"],
            "additionalProperties": False,
            "properties": {"app_counts": _COUNT_MAP, "tool_counts": _COUNT_MAP},
        },
        "observations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "source_task_id", "lines"],
                "additionalProperties": False,
                "properties": {
                    "index": {"type": "integer", "minimum": 1},
                    "source_task_id": {"type": "string"},
                    "lines": {
                        "type": "array",
                        "minItems": 1,
                        "maxItems": 5,
                        "items": {"type": "string"},
                    },
                },
            },
        },
    },
}


def _format_path(parts: Iterable[Any]) -> str:
    out = ""
    for part in parts:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += f".{part}" if out else str(part)
    return out


def _validate(doc: Any, schema: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise SchemaError(_format_path(err.absolute_path), err.message)


def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _loads(text: str | bytes | dict) -> Any:
    if isinstance(text, dict):
        return text
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"not valid JSON: {exc}") from exc


def solver_to_document(memory: SolverMemory) -> dict:
    return {
        "version": DOCUMENT_VERSION,
        "sections": {
            s: [
                {"id": b.id, "content": b.content, "helpful": b.helpful, "harmful": b.harmful}
                for b in memory.sections[s]
            ]
            for s in SECTIONS
        },
        "next_counter": {s: memory.next_counter[s] for s in SECTIONS},
    }


def solver_from_document(doc: Any) -> SolverMemory:
    _validate(doc, SOLVER_SCHEMA)
    seen: set[str] = set()
    sections: dict[str, tuple[PlaybookBullet, ...]] = {}
    for section in SECTIONS:
        bullets = []
        for i, raw in enumerate(doc["sections"][section]):
            path = f"sections.{section}[{i}].id"
            match = BULLET_ID_RE.match(raw["id"])
            assert match is not None  # pattern already checked by the schema
            if match.group(1) != section:
                raise SchemaError(path, f"id {raw['id']!r} is filed under section {section!r}")
            if raw["id"] in seen:
                raise SchemaError(path, f"duplicate bullet id {raw['id']!r}")
            if int(match.group(2)) >= doc["next_counter"][section]:
                raise SchemaError(path, f"id {raw['id']!r} is not below next_counter")
            seen.add(raw["id"])
            bullets.append(
                PlaybookBullet(raw["id"], section, raw["content"], raw["helpful"], raw["harmful"])
            )
        sections[section] = tuple(bullets)
    counters = {s: doc["next_counter"][s] for s in SECTIONS}
    return SolverMemory(sections=sections, next_counter=counters)


def proposer_to_document(memory: ProposerMemory) -> dict:
    return {
        "version": DOCUMENT_VERSION,
        "records": [
            {
                "task_id": r.task_id,
                "iteration": r.iteration,
                "instruction": r.instruction,
                "outcome": r.outcome,
                "invoked_tools": list(r.invoked_tools),
                "reason": r.reason,
            }
            for r in memory.records
        ],
        "usage": {
            "app_counts": dict(sorted(memory.usage.app_counts.items())),
            "tool_counts": dict(sorted(memory.usage.tool_counts.items())),
        },
        "observations": [
            {"index": o.index, "source_task_id": o.source_task_id, "lines": list(o.lines)}
            for o in memory.observations
        ],
    }


def proposer_from_document(doc: Any) -> ProposerMemory:
    _validate(doc, PROPOSER_SCHEMA)
    records = []
    for i, raw in enumerate(doc["records"]):
        tools = raw["invoked_tools"]
        if tools != sorted(set(tools)):
            raise SchemaError(f"records[{i}].invoked_tools", "must be sorted and duplicate-free")
        if raw["outcome"] != "solved" and not raw["reason"]:
            raise SchemaError(f"records[{i}].reason", "required for failed/infeasible outcomes")
        records.append(PracticeRecord(**raw))
    apps = doc["usage"]["app_counts"]
    tool_counts = doc["usage"]["tool_counts"]
    for key in ("app_counts", "tool_counts"):
        keys = list(doc["usage"][key])
        if keys != sorted(keys):
            raise SchemaError(f"usage.{key}", "keys must be sorted")
    grouped: Counter[str] = Counter()
    for tool, count in tool_counts.items():
        grouped[app_of(tool)] += count
    if {k: v for k, v in grouped.items() if v} != {k: v for k, v in apps.items() if v}:
        raise SchemaError("usage.app_counts", "does not equal tool_counts grouped by app")
    observations = tuple(
        EnvObservation(o["index"], o["source_task_id"], tuple(o["lines"])) for o in doc["observations"]
    )
    return ProposerMemory(
        records=tuple(records),
        usage=UsageStats(dict(apps), dict(tool_counts)),
        observations=observations,
    )


def serialize_memory(memory: SolverMemory | ProposerMemory) -> str:
    """Canonical JSON text; equal memories serialize to identical bytes."""
    if isinstance(memory, SolverMemory):
        return _dumps(solver_to_document(memory))
    if isinstance(memory, ProposerMemory):
        return _dumps(proposer_to_document(memory))
    raise TypeError(f"cannot serialize {type(memory).__name__}")


def deserialize_memory(text: str | bytes | dict, kind: str | None = None) -> SolverMemory | ProposerMemory:
    """Parse a memory document; ``kind`` is "solver", "proposer", or None to detect."""
    doc = _loads(text)
    if kind is None:
        if isinstance(doc, dict) and "sections" in doc:
            kind = "solver"
        elif isinstance(doc, dict) and "records" in doc:
            kind = "proposer"
        else:
            raise SchemaError("", "document is neither a solver nor a proposer memory")
    if kind == "solver":
        return solver_from_document(doc)
    if kind == "proposer":
        return proposer_from_document(doc)
    raise ValueError(f"unknown memory kind {kind!r}")


def deserialize_solver_memory(text: str | bytes | dict) -> SolverMemory:
    return solver_from_document(_loads(text))


def deserialize_proposer_memory(text: str | bytes | dict) -> ProposerMemory:
    return proposer_from_document(_loads(text))
