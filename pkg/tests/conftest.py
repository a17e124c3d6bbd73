from __future__ import annotations

import json
from typing import Callable

import pytest

from pretask.environment import Trajectory, TrajectoryStep
from pretask.gateway import CallableBackend, Gateway, ModelRequest, SyntheticTask, ValidationVerdict


def make_task(task_id: str = "t1-1", instruction: str = "List my notes.", iteration: int = 1) -> SyntheticTask:
    return SyntheticTask(task_id, iteration, ("notes",), instruction, ("notes.list_notes",))


def make_trajectory(task_id: str = "t1-1", tools: tuple[str, ...] = ("notes.login", "notes.list_notes")) -> Trajectory:
    steps = [
        TrajectoryStep(i, "tool_call", f"CALL {tool} {{}}", "ok", False, tool, {})
        for i, tool in enumerate(tools)
    ]
    steps.append(TrajectoryStep(len(steps), "message", "DONE ok", ""))
    return Trajectory(task_id, tuple(steps), "completed", "ok")


def verdict(feasibility: int = 5, completion: int = 5) -> ValidationVerdict:
    return ValidationVerdict(feasibility, f"feas {feasibility}", completion, f"comp {completion}")


def reflection_json(key_insight: str = "log in first", tags: dict | None = None) -> str:
    return json.dumps(
        {
            "reasoning": "r",
            "error_identification": "e",
            "root_cause_analysis": "c",
            "correct_approach": "a",
            "key_insight": key_insight,
            "bullet_tags": tags or {},
        }
    )


def curator_json(*ops: tuple[str, str], extra: list | None = None) -> str:
    operations = [{"type": "ADD", "section": s, "content": c} for s, c in ops]
    return json.dumps({"reasoning": "r", "operations": operations + (extra or [])})


class RoleScript:
    """Per-role response queues for a CallableBackend."""

    def __init__(self, **queues: list[str]):
        self.queues = {role: list(texts) for role, texts in queues.items()}
        self.requests: list[ModelRequest] = []

    def __call__(self, request: ModelRequest) -> str:
        self.requests.append(request)
        queue = self.queues.get(request.role)
        if not queue:
            raise AssertionError(f"unexpected {request.role} call #{request.request_index}")
        return queue.pop(0)

    def gateway(self) -> Gateway:
        return Gateway(CallableBackend(self), sleep=lambda _: None)


@pytest.fixture
def role_script() -> Callable[..., RoleScript]:
    return RoleScript


# acceptance summary: tests/test_acceptance.py records one line per criterion here
ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
