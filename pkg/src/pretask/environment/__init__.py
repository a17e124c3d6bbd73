"""Executable tool environments, solver execution, and trajectory utilities."""

from .base import (
    EnvironmentFactory,
    EnvironmentHandle,
    Param,
    RegisteredEnvironment,
    ToolSpec,
    Trajectory,
    TrajectoryStep,
    get_environment,
    register_environment,
    registered_environments,
)
from .miniworld import MiniWorld, miniworld_create
from .solver import (
    DEFAULT_RENDER_CAP,
    DEFAULT_STEP_LIMIT,
    Action,
    build_solver_prompt,
    extract_tool_calls,
    parse_action,
    render_trajectory,
    run_solver,
)

__all__ = [
    "Action",
    "DEFAULT_RENDER_CAP",
    "DEFAULT_STEP_LIMIT",
    "EnvironmentFactory",
    "EnvironmentHandle",
    "MiniWorld",
    "Param",
    "RegisteredEnvironment",
    "ToolSpec",
    "Trajectory",
    "TrajectoryStep",
    "build_solver_prompt",
    "extract_tool_calls",
    "get_environment",
    "miniworld_create",
    "parse_action",
    "register_environment",
    "registered_environments",
    "render_trajectory",
    "run_solver",
]
