"""Reflector/curator playbook induction over one task-trajectory pair."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

from .environment import DEFAULT_RENDER_CAP, Trajectory, render_trajectory
from .errors import ParseError
from .gateway import (
    AddOperation,
    Gateway,
    Reflection,
    SyntheticTask,
    ValidationVerdict,
    build_curator_prompt,
    build_reflector_prompt,
    parse_operations,
    parse_reflection,
    render_verdict,
)
from .memory import SolverMemory, add_bullet, apply_tag_updates, render_playbook

logger = logging.getLogger(__name__)

Warn = Callable[[str], None]


def normalize_content(text: str) -> str:
    return " ".join(text.lower().split())


def render_reflection(reflection: Reflection) -> str:
    return "\n".join(
        [
            f"key_insight: {reflection.key_insight}",
            f"correct_approach: {reflection.correct_approach}",
            f"root_cause_analysis: {reflection.root_cause_analysis}",
            f"error_identification: {reflection.error_identification}",
        ]
    )


def reflect(
    task: SyntheticTask,
    trajectory_text: str,
    ground_truth_text: str | None,
    playbook_text: str,
    gateway: Gateway,
    env_name: str = "agent",
    on_warning: Warn | None = None,
) -> Reflection:
    request = build_reflector_prompt(task, ground_truth_text, playbook_text, trajectory_text, env_name)
    return parse_reflection(gateway.complete(request), on_warning)


def curate(
    task: SyntheticTask,
    playbook_text: str,
    trajectory_text: str,
    reflections_text: str,
    gateway: Gateway,
    on_warning: Warn | None = None,
) -> list[AddOperation]:
    request = build_curator_prompt(task, playbook_text, trajectory_text, reflections_text)
    return parse_operations(gateway.complete(request), on_warning)


def apply_operations(
    memory: SolverMemory, ops: list[AddOperation]
) -> tuple[SolverMemory, list[str], int]:
    """Append each ADD unless its normalized content already exists in that section.

    Returns (memory, new bullet ids, skipped count).
    """
    added: list[str] = []
    skipped = 0
    for op in ops:
        existing = {normalize_content(b.content) for b in memory.sections[op.section]}
        if normalize_content(op.content) in existing:
            skipped += 1
            continue
        bullet, memory = add_bullet(memory, op.section, op.content)
        added.append(bullet.id)
    return memory, added, skipped


@dataclass
class InductionResult:
    memory: SolverMemory
    changed: bool = False
    added_ids: list[str] = field(default_factory=list)
    unknown_tag_ids: list[str] = field(default_factory=list)
    skipped_duplicates: int = 0
    error: str | None = None
    warnings: list[str] = field(default_factory=list)


def induce_detailed(
    task: SyntheticTask,
    trajectory: Trajectory | str,
    verdict: ValidationVerdict | str | None,
    memory: SolverMemory,
    gateway: Gateway,
    env_name: str = "agent",
    render_cap: int = DEFAULT_RENDER_CAP,
) -> InductionResult:
    """Reflect, apply tags, curate, apply ADDs. Any parse failure leaves ``memory`` untouched.

    ``verdict`` fills the reflector's ground-truth slot: a validator verdict
    during construction, None (rendered as ``None``) for online updates.
    """
    if isinstance(trajectory, Trajectory):
        trajectory = render_trajectory(trajectory, render_cap)
    if isinstance(verdict, ValidationVerdict):
        verdict = render_verdict(verdict)
    warnings: list[str] = []
    playbook_text = render_playbook(memory)
    try:
        reflection = reflect(
            task, trajectory, verdict, playbook_text, gateway, env_name, warnings.append
        )
        tagged, unknown = apply_tag_updates(memory, reflection.bullet_tags)
        ops = curate(
            task,
            render_playbook(tagged),
            trajectory,
            render_reflection(reflection),
            gateway,
            warnings.append,
        )
    except ParseError as exc:
        logger.warning("induction for %s aborted: %s", task.task_id, exc)
        return InductionResult(memory, error=f"{type(exc).__name__}: {exc}", warnings=warnings)
    updated, added, skipped = apply_operations(tagged, ops)
    if unknown:
        warnings.append(f"reflector tagged unknown bullet ids: {', '.join(unknown)}")
    return InductionResult(
        memory=updated,
        changed=updated != memory,
        added_ids=added,
        unknown_tag_ids=unknown,
        skipped_duplicates=skipped,
        warnings=warnings,
    )


def induce(
    task: SyntheticTask,
    trajectory: Trajectory | str,
    verdict: ValidationVerdict | str | None,
    memory: SolverMemory,
    gateway: Gateway,
    env_name: str = "agent",
    render_cap: int = DEFAULT_RENDER_CAP,
) -> SolverMemory:
    return induce_detailed(task, trajectory, verdict, memory, gateway, env_name, render_cap).memory
