"""Solver execution, the action grammar, and trajectory utilities.

Action grammar, one action per model turn::

    CALL <app>.<tool> {"arg": value, ...}
    DONE <answer>
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Any

from ..gateway import Gateway, ModelRequest, SyntheticTask
from ..gateway.templates import SOLVER_TEMPLATE, fill
from ..memory import SolverMemory, render_playbook
from .base import EnvironmentHandle, Trajectory, TrajectoryStep

logger = logging.getLogger(__name__)

DEFAULT_STEP_LIMIT = 20
DEFAULT_RENDER_CAP = 20_000

INVALID_ACTION_OBSERVATION = (
    "invalid action: expected 'CALL <app>.<tool> {json arguments}' or 'DONE <answer>'"
)

_FENCE_RE = re.compile(r"^\s*```[\w-]*\s*$", re.MULTILINE)
_TOOL_RE = re.compile(r"([A-Za-z_]\w*\.[A-Za-z_]\w*)(.*)", re.DOTALL)
_APIS_RE = re.compile(r"apis\.([A-Za-z_]\w*)\.([A-Za-z_]\w*)\s*\(")


@dataclass(frozen=True)
class Action:
    kind: str  # "call" | "done" | "invalid"
    tool: str | None = None
    arguments: dict[str, Any] | None = None
    answer: str = ""
    error: str = ""


def parse_action(text: str) -> Action:
    cleaned = _FENCE_RE.sub("", text or "")
    lines = cleaned.splitlines()
    for i, line in enumerate(lines):
        head = line.lstrip()
        keyword = head[:4]
        if keyword not in ("CALL", "DONE") or head[4:5] not in ("", " ", "\t"):
            continue
        rest = "\n".join([head[4:]] + lines[i + 1 :]).strip()
        if keyword == "DONE":
            return Action("done", answer=rest)
        match = _TOOL_RE.match(rest)
        if not match:
            return Action("invalid", error="CALL without an <app>.<tool> name")
        tool, args_text = match.group(1), match.group(2).strip()
        if not args_text:
            return Action("call", tool=tool, arguments={})
        try:
            args, _ = json.JSONDecoder().raw_decode(args_text)
        except json.JSONDecodeError as exc:
            return Action("invalid", error=f"arguments are not valid JSON ({exc.msg})")
        if not isinstance(args, dict):
            return Action("invalid", error="arguments must be a JSON object")
        return Action("call", tool=tool, arguments=args)
    return Action("invalid", error="no CALL or DONE action found")


def build_solver_prompt(
    task: SyntheticTask,
    memory: SolverMemory,
    documentation: str,
    transcript: str,
    env_name: str,
) -> ModelRequest:
    prompt = fill(
        SOLVER_TEMPLATE,
        {
            "env_name": env_name,
            "documentation": documentation,
            "solver_memory": render_playbook(memory),
            "instruction": task.instruction,
            "transcript": transcript or "(no steps yet)",
        },
    )
    return ModelRequest("solver", prompt)


def run_solver(
    task: SyntheticTask,
    solver_memory: SolverMemory,
    env: EnvironmentHandle,
    gateway: Gateway,
    step_limit: int = DEFAULT_STEP_LIMIT,
    render_cap: int = DEFAULT_RENDER_CAP,
) -> Trajectory:
    """Execute ``task`` with the playbook in the prompt; ``env`` must already be reset."""
    if step_limit < 1:
        raise ValueError("step_limit must be >= 1")
    documentation = env.list_documentation()
    env_name = getattr(env, "name", "environment")
    steps: list[TrajectoryStep] = []
    terminal = "step_limit"
    answer = None
    while len(steps) < step_limit:
        transcript = render_trajectory(Trajectory(task.task_id, tuple(steps)), render_cap)
        request = build_solver_prompt(task, solver_memory, documentation, transcript, env_name)
        text = gateway.complete(request).text
        raw = text.strip()
        action = parse_action(text)
        index = len(steps)
        if action.kind == "done":
            steps.append(TrajectoryStep(index, "message", raw, "", False))
            terminal, answer = "completed", action.answer
            break
        if action.kind == "invalid":
            observation = f"{INVALID_ACTION_OBSERVATION} ({action.error})"
            steps.append(TrajectoryStep(index, "message", raw, observation, True))
            continue
        try:
            observation, is_error = env.invoke(action.tool, action.arguments or {})
        except Exception as exc:  # a misbehaving plug-in must not kill the run
            logger.exception("environment raised during %s", action.tool)
            steps.append(
                TrajectoryStep(
                    index, "tool_call", raw, f"environment failure: {exc}", True,
                    action.tool, action.arguments,
                )
            )
            terminal = "aborted"
            break
        steps.append(
            TrajectoryStep(index, "tool_call", raw, observation, is_error, action.tool, action.arguments)
        )
    return Trajectory(task.task_id, tuple(steps), terminal, answer)


def extract_tool_calls(trajectory: Trajectory) -> list[str]:
    """Qualified tool ids invoked, in order and with multiplicity across steps.

    Each step contributes its structured ``tool`` field plus any free-text
    ``apis.<app>.<name>(`` calls found in its raw action, de-duplicated
    within the step.
    """
    calls: list[str] = []
    for step in trajectory.steps:
        found: list[str] = []
        if step.tool is not None:
            found.append(step.tool)
        for app, name in _APIS_RE.findall(step.raw_action):
            found.append(f"{app}.{name}")
        calls.extend(dict.fromkeys(found))
    return calls


def _block(step: TrajectoryStep) -> str:
    return f"STEP {step.index}\n{step.raw_action}\n{step.observation}"


def _marker(dropped: int) -> str:
    return f"[... {dropped} earlier step(s) truncated ...]\n\n" if dropped else ""


def render_trajectory(trajectory: Trajectory, cap: int = DEFAULT_RENDER_CAP) -> str:
    """Render steps as ``STEP i`` blocks, dropping the oldest steps to fit ``cap``."""
    blocks = [_block(s) for s in trajectory.steps]
    text = "\n\n".join(blocks)
    if len(text) <= cap:
        return text
    kept: list[str] = []
    size = 0
    for i in range(len(blocks) - 1, -1, -1):
        new_size = size + len(blocks[i]) + (2 if kept else 0)
        if kept and new_size + len(_marker(i)) > cap:
            break
        kept.insert(0, blocks[i])
        size = new_size
    body = "\n\n".join(kept)
    marker = _marker(len(blocks) - len(kept))
    if len(marker) + len(body) <= cap:
        return marker + body
    # only the final block is left and even it is over the cap
    return body if len(body) <= cap else body[-cap:]
