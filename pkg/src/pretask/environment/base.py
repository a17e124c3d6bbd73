from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Any, Callable, Mapping

PARAM_TYPES = ("string", "int", "real", "bool", "list")
TERMINALS = ("completed", "step_limit", "aborted")


@dataclass(frozen=True)
class Param:
    name: str
    type: str
    required: bool = True


@dataclass(frozen=True)
class ToolSpec:
    app: str
    name: str
    description: str
    params: tuple[Param, ...] = ()

    @property
    def qualified_id(self) -> str:
        return f"{self.app}.{self.name}"

    def signature(self) -> str:
        parts = [f"{p.name}: {p.type}" + ("" if p.required else "?") for p in self.params]
        return f"{self.qualified_id}({', '.join(parts)}): {self.description}"


@dataclass(frozen=True)
class TrajectoryStep:
    index: int
    action_kind: str
    raw_action: str
    observation: str
    is_error: bool = False
    tool: str | None = None
    arguments: Mapping[str, Any] | None = None

    def __post_init__(self) -> None:
        if self.action_kind not in ("tool_call", "message"):
            raise ValueError(f"unknown action kind {self.action_kind!r}")
        if (self.action_kind == "tool_call") != (self.tool is not None):
            raise ValueError("tool must be set exactly for tool_call steps")

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "action_kind": self.action_kind,
            "tool": self.tool,
            "arguments": dict(self.arguments) if self.arguments is not None else None,
            "raw_action": self.raw_action,
            "observation": self.observation,
            "is_error": self.is_error,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> TrajectoryStep:
        return cls(
            index=int(data["index"]),
            action_kind=data["action_kind"],
            raw_action=data.get("raw_action", ""),
            observation=data.get("observation", ""),
            is_error=bool(data.get("is_error", False)),
            tool=data.get("tool"),
            arguments=data.get("arguments"),
        )


@dataclass(frozen=True)
class Trajectory:
    task_id: str
    steps: tuple[TrajectoryStep, ...] = ()
    terminal: str = "completed"
    final_answer: str | None = None

    def __post_init__(self) -> None:
        if self.terminal not in TERMINALS:
            raise ValueError(f"unknown terminal state {self.terminal!r}")
        if [s.index for s in self.steps] != list(range(len(self.steps))):
            raise ValueError("step indices must be 0..len-1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "steps": [s.to_dict() for s in self.steps],
            "terminal": self.terminal,
            "final_answer": self.final_answer,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Trajectory:
        return cls(
            task_id=data.get("task_id", ""),
            steps=tuple(TrajectoryStep.from_dict(s) for s in data.get("steps", ())),
            terminal=data.get("terminal", "completed"),
            final_answer=data.get("final_answer"),
        )


class EnvironmentHandle(abc.ABC):
    """An executable tool environment. One owner per handle; no concurrent ``invoke``."""

    name: str = "environment"

    @abc.abstractmethod
    def list_documentation(self) -> str: ...

    @abc.abstractmethod
    def invoke(self, tool: str, arguments: Mapping[str, Any]) -> tuple[str, bool]:
        """Run one tool call; returns (observation, is_error)."""

    @abc.abstractmethod
    def reset(self, seed: int) -> None: ...

    @abc.abstractmethod
    def fingerprint(self) -> str: ...


EnvironmentFactory = Callable[[int], EnvironmentHandle]


@dataclass(frozen=True)
class RegisteredEnvironment:
    factory: EnvironmentFactory
    meta_tools: tuple[str, ...] = ()


_REGISTRY: dict[str, RegisteredEnvironment] = {}


def register_environment(
    name: str, factory: EnvironmentFactory, meta_tools: tuple[str, ...] = ()
) -> None:
    """Make ``factory(seed)`` resolvable by ``name`` from CLI configs.

    ``meta_tools`` are glob patterns for documentation-browsing tools that the
    diagnostics leave out of coverage counts.
    """
    _REGISTRY[name] = RegisteredEnvironment(factory, tuple(meta_tools))


def get_environment(name: str) -> RegisteredEnvironment:
    try:
        return _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY)) or "none"
        raise KeyError(f"unknown environment {name!r} (registered: {known})") from None


def registered_environments() -> list[str]:
    return sorted(_REGISTRY)

