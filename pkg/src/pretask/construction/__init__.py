"""The construction loop, task seeding, and online continuation."""

from .checkpoint import Cursor, read_cursor, read_memories, write_memories
from .config import RunConfig
from .loop import (
    ConstructionResult,
    RunAborted,
    admitted_count,
    classify_outcome,
    construct,
    is_feasible,
    task_seed,
    update_proposer,
    update_solver,
)
from .online import OnlineResult, OnlineTask, StateCheck, evaluate_task, online_continue
from .runlog import EVENT_KINDS, RunLog, normalize_events
from .seeding import SeedPair, seed_from_tasks, seed_pair_from_dict

__all__ = [
    "ConstructionResult",
    "Cursor",
    "EVENT_KINDS",
    "OnlineResult",
    "OnlineTask",
    "RunAborted",
    "RunConfig",
    "RunLog",
    "SeedPair",
    "StateCheck",
    "admitted_count",
    "classify_outcome",
    "construct",
    "evaluate_task",
    "is_feasible",
    "normalize_events",
    "online_continue",
    "read_cursor",
    "read_memories",
    "seed_from_tasks",
    "seed_pair_from_dict",
    "task_seed",
    "update_proposer",
    "update_solver",
    "write_memories",
]
