"""Deployment-time continuation: solve a task stream, optionally updating memory after each task."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from ..environment import EnvironmentFactory, EnvironmentHandle, Trajectory, run_solver
from ..errors import SchemaError
from ..gateway import Gateway, SyntheticTask
from ..induction import induce_detailed
from ..memory import SolverMemory
from .config import RunConfig
from .loop import cost_listener
from .runlog import RunLog


@dataclass(frozen=True)
class StateCheck:
    """Post-run probe: invoke ``tool`` and require ``expect`` in the observation."""

    tool: str
    arguments: Mapping[str, Any] = field(default_factory=dict)
    expect: str | None = None


@dataclass(frozen=True)
class OnlineTask:
    task_id: str
    instruction: str
    seed: int = 0
    expected_answer: str | None = None
    checks: tuple[StateCheck, ...] = ()

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], position: int = 0) -> OnlineTask:
        try:
            checks = tuple(
                StateCheck(c["tool"], dict(c.get("arguments", {})), c.get("expect"))
                for c in data.get("checks", ())
            )
            return cls(
                task_id=str(data.get("task_id", f"online-{position + 1}")),
                instruction=str(data["instruction"]),
                seed=int(data.get("seed", 0)),
                expected_answer=data.get("expected_answer"),
                checks=checks,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"tasks[{position}]", f"malformed online task: {exc}") from exc


@dataclass(frozen=True)
class OnlineResult:
    task_id: str
    success: bool
    terminal: str
    steps: int
    final_answer: str | None
    memory_changed: bool


def evaluate_task(task: OnlineTask, env: EnvironmentHandle, trajectory: Trajectory) -> bool:
    """Success: the solver finished, gave the expected answer, and every state check passes."""
    if trajectory.terminal != "completed":
        return False
    if task.expected_answer is not None:
        answer = (trajectory.final_answer or "").strip().lower()
        if task.expected_answer.strip().lower() not in answer:
            return False
    for check in task.checks:
        observation, is_error = env.invoke(check.tool, check.arguments)
        if is_error:
            return False
        if check.expect is not None and check.expect not in observation:
            return False
    return True


def online_continue(
    solver_memory: SolverMemory,
    tasks: Iterable[OnlineTask],
    env_factory: EnvironmentFactory,
    gateway: Gateway,
    config: RunConfig | None = None,
    *,
    frozen: bool = False,
    log: RunLog | None = None,
) -> tuple[SolverMemory, list[OnlineResult]]:
    """Solve each task with the current playbook, then (unless frozen) induce from it.

    There is no validator gate here and the reflector's ground-truth slot is
    None. Model calls are booked under the evaluation phase.
    """
    config = config or RunConfig()
    memory = solver_memory
    results: list[OnlineResult] = []
    previous_phase, previous_listener = gateway.phase, gateway.listener
    gateway.phase = "evaluation"
    if log is not None:
        gateway.listener = cost_listener(log)
    try:
        for task in tasks:
            env = env_factory(task.seed)
            synthetic = SyntheticTask(task.task_id, 0, ("online",), task.instruction)
            trajectory = run_solver(
                synthetic, memory, env, gateway, config.step_limit, config.trajectory_render_cap
            )
            success = evaluate_task(task, env, trajectory)
            changed = False
            if not frozen:
                name = getattr(env, "name", "environment")
                result = induce_detailed(
                    synthetic, trajectory, None, memory, gateway, name, config.trajectory_render_cap
                )
                changed = result.changed
                memory = result.memory
            results.append(
                OnlineResult(
                    task.task_id,
                    success,
                    trajectory.terminal,
                    len(trajectory.steps),
                    trajectory.final_answer,
                    changed,
                )
            )
    finally:
        gateway.phase, gateway.listener = previous_phase, previous_listener
    return memory, results
