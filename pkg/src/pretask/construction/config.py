from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Any, Mapping

from ..environment import DEFAULT_RENDER_CAP, DEFAULT_STEP_LIMIT
from ..errors import ConfigError
from ..memory import ContextLimits


@dataclass(frozen=True)
class RunConfig:
    iterations: int = 10
    batch_size: int = 10
    feasibility_admit_threshold: int = 5
    completion_success_threshold: int = 4
    infeasible_label_max: int = 2
    seed: int = 0
    step_limit: int = DEFAULT_STEP_LIMIT
    trajectory_render_cap: int = DEFAULT_RENDER_CAP
    parallel_batch: bool = False
    max_workers: int = 4
    limits: ContextLimits = field(default_factory=ContextLimits)

    def __post_init__(self) -> None:
        if self.iterations < 1 or self.batch_size < 1:
            raise ConfigError("iterations and batch_size must be >= 1")
        if not 1 <= self.feasibility_admit_threshold <= 5:
            raise ConfigError("feasibility_admit_threshold must be in 1..5")
        if not 1 <= self.infeasible_label_max < self.completion_success_threshold <= 5:
            raise ConfigError(
                "need 1 <= infeasible_label_max < completion_success_threshold <= 5"
            )
        if self.step_limit < 1:
            raise ConfigError("step_limit must be >= 1")
        if self.trajectory_render_cap < 1 or self.max_workers < 1:
            raise ConfigError("trajectory_render_cap and max_workers must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None) -> RunConfig:
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown run config field(s): {', '.join(unknown)}")
        limits = data.pop("limits", None)
        if isinstance(limits, Mapping):
            limit_fields = {f.name for f in fields(ContextLimits)}
            bad = sorted(set(limits) - limit_fields)
            if bad:
                raise ConfigError(f"unknown limits field(s): {', '.join(bad)}")
            data["limits"] = ContextLimits(**limits)
        elif limits is not None:
            data["limits"] = limits
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
