from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

ROLES: tuple[str, ...] = ("proposer", "solver", "validator", "env_summarizer", "reflector", "curator")

DEFAULT_TEMPERATURES: Mapping[str, float] = {
    "proposer": 1.0,
    "solver": 0.0,
    "validator": 0.7,
    "env_summarizer": 0.7,
    "reflector": 0.7,
    "curator": 0.7,
}


@dataclass(frozen=True)
class TokenUsage:
    cache_hit_input: int = 0
    cache_miss_input: int = 0
    output: int = 0

    def __post_init__(self) -> None:
        if min(self.cache_hit_input, self.cache_miss_input, self.output) < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: TokenUsage) -> TokenUsage:
        return TokenUsage(
            self.cache_hit_input + other.cache_hit_input,
            self.cache_miss_input + other.cache_miss_input,
            self.output + other.output,
        )

    def to_dict(self) -> dict[str, int]:
        return {
            "cache_hit_input": self.cache_hit_input,
            "cache_miss_input": self.cache_miss_input,
            "output": self.output,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, int] | None) -> TokenUsage:
        data = data or {}
        return cls(
            int(data.get("cache_hit_input", 0)),
            int(data.get("cache_miss_input", 0)),
            int(data.get("output", 0)),
        )


@dataclass(frozen=True)
class ModelRequest:
    """One prompt for one role.

    ``request_index`` is stamped by the gateway when the request is sent;
    builders leave it as None.
    """

    role: str
    prompt: str
    temperature: float | None = None
    request_index: int | None = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.temperature is None:
            object.__setattr__(self, "temperature", DEFAULT_TEMPERATURES[self.role])
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")


@dataclass(frozen=True)
class ModelResponse:
    text: str
    usage: TokenUsage = field(default_factory=TokenUsage)


@dataclass(frozen=True)
class ValidationVerdict:
    feasibility_score: int
    feasibility_reason: str
    completion_score: int
    completion_reason: str

    def __post_init__(self) -> None:
        for name in ("feasibility_score", "completion_score"):
            if getattr(self, name) not in (1, 2, 3, 4, 5):
                raise ValueError(f"{name} must be in 1..5, got {getattr(self, name)!r}")


@dataclass(frozen=True)
class SyntheticTask:
    task_id: str
    iteration: int
    servers: tuple[str, ...]
    instruction: str
    intended_functions: tuple[str, ...] = ()


@dataclass(frozen=True)
class Reflection:
    key_insight: str
    reasoning: str = ""
    error_identification: str = ""
    root_cause_analysis: str = ""
    correct_approach: str = ""
    bullet_tags: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class AddOperation:
    section: str
    content: str
