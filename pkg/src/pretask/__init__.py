"""Agent memory built from synthetic practice before any deployment task is seen."""

from .construction import RunConfig, construct, online_continue, seed_from_tasks
from .environment import MiniWorld, get_environment, register_environment
from .gateway import Gateway, ScriptedBackend
from .induction import induce
from .memory import ProposerMemory, SolverMemory, deserialize_memory, serialize_memory

__version__ = "0.1.0"

__all__ = [
    "Gateway",
    "MiniWorld",
    "ProposerMemory",
    "RunConfig",
    "ScriptedBackend",
    "SolverMemory",
    "construct",
    "deserialize_memory",
    "get_environment",
    "induce",
    "online_continue",
    "register_environment",
    "seed_from_tasks",
    "serialize_memory",
]
