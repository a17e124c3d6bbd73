"""Parsers for model output.

Recovery is deliberately bounded: drop Markdown fence lines, take the longest
top-level bracket-balanced span of the wanted kind that parses (retrying once
with trailing commas removed), and give up otherwise. Nothing is ever sent
back to the model.
"""

from __future__ import annotations

import json
import logging
import math
import re
from typing import Any, Callable

from ..errors import (
    BatchParseError,
    CurationParseError,
    ReflectionParseError,
    SummaryParseError,
    VerdictParseError,
)
from ..memory import SECTIONS, TAGS
from .types import AddOperation, ModelResponse, Reflection, SyntheticTask, ValidationVerdict

logger = logging.getLogger(__name__)

Warn = Callable[[str], None]

_FENCE_RE = re.compile(r"^\s*```[\w-]*\s*$", re.MULTILINE)
_TRAILING_COMMA_RE = re.compile(r",(\s*[}\]])")
_NUMBER_RE = re.compile(r"^\s*(-?\d+(?:\.\d+)?)")
_RENDERED_PREFIX_RE = re.compile(r"^\[[^\]]*\]\s*(?:helpful=\d+\s*harmful=\d+\s*)?::\s*")
_ID_BRACKET_RE = re.compile(r"^\[[A-Za-z_]+-\d+\]")


def _warn(on_warning: Warn | None, message: str) -> None:
    logger.warning(message)
    if on_warning is not None:
        on_warning(message)


def _balanced_spans(text: str, opener: str) -> list[str]:
    closer = "]" if opener == "[" else "}"
    spans = []
    i = 0
    while i < len(text):
        if text[i] != opener:
            i += 1
            continue
        depth = 0
        in_string = False
        escaped = False
        end = None
        for j in range(i, len(text)):
            ch = text[j]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch in "[{":
                depth += 1
            elif ch in "]}":
                depth -= 1
                if depth == 0:
                    end = j
                    break
        if end is None:
            break
        if text[end] == closer:
            spans.append(text[i : end + 1])
        i = end + 1
    return spans


def extract_json(text: str, kind: type) -> Any | None:
    """Recover a JSON array (``kind=list``) or object (``kind=dict``) from model text."""
    cleaned = _FENCE_RE.sub("", text or "")
    try:
        value = json.loads(cleaned)
        if isinstance(value, kind):
            return value
    except json.JSONDecodeError:
        pass
    opener = "[" if kind is list else "{"
    best = None
    for span in _balanced_spans(cleaned, opener):
        for candidate in (span, _TRAILING_COMMA_RE.sub(r"\1", span)):
            try:
                value = json.loads(candidate)
            except json.JSONDecodeError:
                continue
            if isinstance(value, kind) and (best is None or len(span) > best[0]):
                best = (len(span), value)
            break
    return None if best is None else best[1]


def _as_str_list(value: Any) -> list[str] | None:
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        return None
    return [v.strip() for v in value if v.strip()]


def parse_task_batch(
    response: ModelResponse, iteration: int, on_warning: Warn | None = None
) -> list[SyntheticTask]:
    entries = extract_json(response.text, list)
    if entries is None:
        raise BatchParseError("no JSON array of tasks in proposer output", response.text)
    tasks = []
    for position, entry in enumerate(entries, start=1):
        if not isinstance(entry, dict):
            _warn(on_warning, f"task entry {position} is not an object; dropped")
            continue
        question = entry.get("question")
        if not isinstance(question, str) or not question.strip():
            _warn(on_warning, f"task entry {position} has no question; dropped")
            continue
        servers = _as_str_list(entry.get("servers"))
        if not servers:
            _warn(on_warning, f"task entry {position} has no servers; dropped")
            continue
        functions = _as_str_list(entry.get("intended_functions")) or []
        tasks.append(
            SyntheticTask(
                task_id=f"t{iteration}-{position}",
                iteration=iteration,
                servers=tuple(servers),
                instruction=question.strip(),
                intended_functions=tuple(functions),
            )
        )
    if not tasks:
        raise BatchParseError("proposer output contained no valid task entries", response.text)
    return tasks


def _coerce_score(value: Any) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        number = float(value)
    elif isinstance(value, str):
        match = _NUMBER_RE.match(value)
        if not match:
            return None
        number = float(match.group(1))
    else:
        return None
    if math.isnan(number) or math.isinf(number):
        return None
    return int(round(number))


def parse_verdict(response: ModelResponse, on_warning: Warn | None = None) -> ValidationVerdict:
    obj = extract_json(response.text, dict)
    if obj is None:
        raise VerdictParseError("no JSON object in validator output", response.text)
    scores = {}
    for field_name, keys in (
        ("feasibility", ("feasibility_score",)),
        ("completion", ("task_completion_score", "completion_score")),
    ):
        raw = next((obj[k] for k in keys if k in obj), None)
        score = _coerce_score(raw)
        if score is None:
            raise VerdictParseError(f"missing or non-numeric {field_name} score", response.text)
        clamped = min(5, max(1, score))
        if clamped != score:
            _warn(on_warning, f"{field_name} score {score} clamped to {clamped}")
        scores[field_name] = clamped
    return ValidationVerdict(
        feasibility_score=scores["feasibility"],
        feasibility_reason=str(obj.get("feasibility_reason", "") or ""),
        completion_score=scores["completion"],
        completion_reason=str(
            obj.get("task_completion_reason", obj.get("completion_reason", "")) or ""
        ),
    )


MAX_SUMMARY_LINES = 5


def parse_env_summary(response: ModelResponse, on_warning: Warn | None = None) -> list[str]:
    obj = extract_json(response.text, dict)
    if obj is None or "summary" not in obj:
        raise SummaryParseError("no summary field in env-summary output", response.text)
    summary = obj["summary"]
    if isinstance(summary, list):
        raw_lines = [str(s) for s in summary]
    elif isinstance(summary, str):
        raw_lines = summary.splitlines()
    else:
        raise SummaryParseError("summary is neither a string nor a list", response.text)
    lines = []
    for line in raw_lines:
        line = line.strip()
        if line.startswith("- "):
            line = line[2:]
        elif line[:1] in ("-", "*", "•"):
            line = line[1:]
        line = line.strip()
        if line:
            lines.append(line)
    if not lines:
        raise SummaryParseError("summary is empty", response.text)
    if len(lines) > MAX_SUMMARY_LINES:
        _warn(on_warning, f"env summary had {len(lines)} lines; kept first {MAX_SUMMARY_LINES}")
    return lines[:MAX_SUMMARY_LINES]


def parse_reflection(response: ModelResponse, on_warning: Warn | None = None) -> Reflection:
    obj = extract_json(response.text, dict)
    if obj is None:
        raise ReflectionParseError("no JSON object in reflector output", response.text)
    key_insight = obj.get("key_insight")
    if not isinstance(key_insight, str) or not key_insight.strip():
        raise ReflectionParseError("reflection has no key_insight", response.text)
    raw_tags = obj.get("bullet_tags") or {}
    if not isinstance(raw_tags, dict):
        _warn(on_warning, "bullet_tags is not an object; ignored")
        raw_tags = {}
    tags: dict[str, str] = {}
    for bullet_id, tag in raw_tags.items():
        norm = str(tag).strip().lower()
        if norm not in TAGS:
            _warn(on_warning, f"unknown tag {tag!r} for {bullet_id}; treated as neutral")
            norm = "neutral"
        tags[str(bullet_id).strip()] = norm

    def text(key: str) -> str:
        value = obj.get(key, "")
        return value if isinstance(value, str) else json.dumps(value, ensure_ascii=False)

    return Reflection(
        key_insight=key_insight.strip(),
        reasoning=text("reasoning"),
        error_identification=text("error_identification"),
        root_cause_analysis=text("root_cause_analysis"),
        correct_approach=text("correct_approach"),
        bullet_tags=tags,
    )


def parse_operations(response: ModelResponse, on_warning: Warn | None = None) -> list[AddOperation]:
    obj = extract_json(response.text, dict)
    if obj is None or not isinstance(obj.get("operations"), list):
        raise CurationParseError("no operations list in curator output", response.text)
    ops = []
    for i, raw in enumerate(obj["operations"]):
        if not isinstance(raw, dict):
            _warn(on_warning, f"operation {i} is not an object; dropped")
            continue
        op_type = str(raw.get("type", "")).strip().upper()
        if op_type != "ADD":
            _warn(on_warning, f"operation {i} has unsupported type {raw.get('type')!r}; dropped")
            continue
        section = str(raw.get("section", "")).strip().lower()
        if section not in SECTIONS:
            _warn(on_warning, f"operation {i} targets unknown section {raw.get('section')!r}; dropped")
            continue
        content = raw.get("content")
        if not isinstance(content, str):
            _warn(on_warning, f"operation {i} has no content; dropped")
            continue
        content = " ".join(_RENDERED_PREFIX_RE.sub("", content.strip()).split())
        if not content or _ID_BRACKET_RE.match(content):
            _warn(on_warning, f"operation {i} content is empty or carries a bullet id; dropped")
            continue
        ops.append(AddOperation(section=section, content=content))
    return ops
