from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from ..environment import Trajectory, extract_tool_calls
from ..errors import ContractError, SchemaError
from ..gateway import Gateway, SyntheticTask, ValidationVerdict
from ..induction import induce
from ..memory import PracticeRecord, ProposerMemory, SolverMemory, app_of
from .config import RunConfig


@dataclass(frozen=True)
class SeedPair:
    instruction: str
    trajectory: Trajectory
    verdict: ValidationVerdict | None = None


def seed_pair_from_dict(data: Mapping[str, Any], position: int = 0) -> SeedPair:
    """Decode one line of a seed-pairs file: {instruction, trajectory, verdict?}."""
    try:
        instruction = data["instruction"]
        traj = dict(data["trajectory"])
        traj.setdefault("task_id", f"seed-{position}")
        trajectory = Trajectory.from_dict(traj)
        raw = data.get("verdict")
        verdict = None
        if raw is not None:
            verdict = ValidationVerdict(
                int(raw["feasibility_score"]),
                str(raw.get("feasibility_reason", "")),
                int(raw.get("completion_score", raw.get("task_completion_score"))),
                str(raw.get("completion_reason", raw.get("task_completion_reason", ""))),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"pairs[{position}]", f"malformed seed pair: {exc}") from exc
    if not isinstance(instruction, str) or not instruction.strip():
        raise SchemaError(f"pairs[{position}].instruction", "must be a non-empty string")
    return SeedPair(instruction.strip(), trajectory, verdict)


def seed_from_tasks(
    pairs: Iterable[SeedPair | tuple],
    config: RunConfig | None = None,
    gateway: Gateway | None = None,
    env_name: str = "agent",
) -> tuple[ProposerMemory, SolverMemory]:
    """Build starting memories from solved example tasks.

    Each pair adds one solved record (iteration 0, task id ``seed-<i>``) and
    runs induction with the pair's verdict, or None, as ground truth.
    """
    config = config or RunConfig()
    pairs = [p if isinstance(p, SeedPair) else SeedPair(*p) for p in pairs]
    if not pairs:
        raise ContractError("seed_from_tasks needs at least one pair")
    if gateway is None:
        raise ContractError("seed_from_tasks needs a gateway for induction")
    proposer = ProposerMemory.empty()
    solver = SolverMemory.empty()
    for i, pair in enumerate(pairs, start=1):
        tools = extract_tool_calls(pair.trajectory)
        servers = tuple(dict.fromkeys(app_of(t) for t in tools)) or ("unknown",)
        task = SyntheticTask(f"seed-{i}", 0, servers, pair.instruction)
        record = PracticeRecord(task.task_id, 0, pair.instruction, "solved", tuple(tools), "")
        proposer = ProposerMemory(
            records=proposer.records + (record,),
            usage=proposer.usage.merged(tools),
            observations=proposer.observations,
        )
        solver = induce(
            task, pair.trajectory, pair.verdict, solver, gateway, env_name, config.trajectory_render_cap
        )
    return proposer, solver
