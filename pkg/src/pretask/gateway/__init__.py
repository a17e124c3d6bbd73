"""Prompt construction, model backends, and defensive response parsing."""

from .backends import (
    Backend,
    CallableBackend,
    FixtureBranch,
    FixtureEntry,
    HttpBackend,
    ScriptedBackend,
)
from .builders import (
    build_curator_prompt,
    build_env_summary_prompt,
    build_reflector_prompt,
    build_task_generation_prompt,
    build_validator_prompt,
    render_verdict,
)
from .client import CallRecord, Gateway
from .fixtures import FixtureScript
from .parsers import (
    extract_json,
    parse_env_summary,
    parse_operations,
    parse_reflection,
    parse_task_batch,
    parse_verdict,
)
from .types import (
    DEFAULT_TEMPERATURES,
    ROLES,
    AddOperation,
    ModelRequest,
    ModelResponse,
    Reflection,
    SyntheticTask,
    TokenUsage,
    ValidationVerdict,
)

__all__ = [
    "FixtureScript",
    "AddOperation",
    "Backend",
    "CallRecord",
    "CallableBackend",
    "DEFAULT_TEMPERATURES",
    "FixtureBranch",
    "FixtureEntry",
    "Gateway",
    "HttpBackend",
    "ModelRequest",
    "ModelResponse",
    "ROLES",
    "Reflection",
    "ScriptedBackend",
    "SyntheticTask",
    "TokenUsage",
    "ValidationVerdict",
    "build_curator_prompt",
    "build_env_summary_prompt",
    "build_reflector_prompt",
    "build_task_generation_prompt",
    "build_validator_prompt",
    "extract_json",
    "parse_env_summary",
    "parse_operations",
    "parse_reflection",
    "parse_task_batch",
    "parse_verdict",
    "render_verdict",
]
