"""Pure prompt builders: identical inputs always give byte-identical prompts."""

from __future__ import annotations

import json

from ..memory import split_proposer_context
from .templates import (
    CURATOR_TEMPLATE,
    ENV_SUMMARY_TEMPLATE,
    REFLECTOR_TEMPLATE,
    TASK_GENERATION_TEMPLATE,
    VALIDATOR_TEMPLATE,
    fill,
)
from .types import ModelRequest, SyntheticTask, ValidationVerdict

EMPTY_SECTION = "none"
DEFAULT_ENV_NAME = "agent"


def build_task_generation_prompt(
    docs: str, proposer_context: str, num_tasks: int, env_name: str = DEFAULT_ENV_NAME
) -> ModelRequest:
    if num_tasks < 1:
        raise ValueError("num_tasks must be >= 1")
    env_info, history = split_proposer_context(proposer_context)
    prompt = fill(
        TASK_GENERATION_TEMPLATE,
        {
            "env_name": env_name,
            "api_docs": docs,
            "environment_info_section": env_info or EMPTY_SECTION,
            "task_history_section": history or EMPTY_SECTION,
            "num_tasks": str(num_tasks),
        },
    )
    return ModelRequest("proposer", prompt)


def build_validator_prompt(
    task: SyntheticTask, trajectory_text: str, env_name: str = DEFAULT_ENV_NAME
) -> ModelRequest:
    prompt = fill(
        VALIDATOR_TEMPLATE,
        {"env_name": env_name, "task_instruction": task.instruction, "trajectory": trajectory_text},
    )
    return ModelRequest("validator", prompt)


def build_env_summary_prompt(
    task: SyntheticTask, trajectory_text: str, env_name: str = DEFAULT_ENV_NAME
) -> ModelRequest:
    prompt = fill(
        ENV_SUMMARY_TEMPLATE,
        {"env_name": env_name, "task_instruction": task.instruction, "trajectory": trajectory_text},
    )
    return ModelRequest("env_summarizer", prompt)


def render_verdict(verdict: ValidationVerdict) -> str:
    """Render a verdict in the validator's own output format."""
    return json.dumps(
        {
            "feasibility_reason": verdict.feasibility_reason,
            "feasibility_score": verdict.feasibility_score,
            "task_completion_reason": verdict.completion_reason,
            "task_completion_score": verdict.completion_score,
        },
        indent=2,
        ensure_ascii=False,
    )


def build_reflector_prompt(
    task: SyntheticTask,
    ground_truth: str | None,
    playbook_text: str,
    trajectory_text: str,
    env_name: str = DEFAULT_ENV_NAME,
) -> ModelRequest:
    """``ground_truth`` of None (online mode) renders as the literal ``None``."""
    prompt = fill(
        REFLECTOR_TEMPLATE,
        {
            "env_name": env_name,
            "task_instruction": task.instruction,
            "ground_truth_result": "None" if ground_truth is None else ground_truth,
            "playbook": playbook_text,
            "trajectory": trajectory_text,
        },
    )
    return ModelRequest("reflector", prompt)


def build_curator_prompt(
    task: SyntheticTask, playbook_text: str, trajectory_text: str, reflections_text: str
) -> ModelRequest:
    prompt = fill(
        CURATOR_TEMPLATE,
        {
            "task_instruction": task.instruction,
            "playbook": playbook_text,
            "trajectory": trajectory_text,
            "current_reflections": reflections_text,
        },
    )
    return ModelRequest("curator", prompt)
