"""Batched propose / execute / validate loop with asymmetric memory updates."""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, NamedTuple, Sequence

from ..environment import (
    EnvironmentFactory,
    Trajectory,
    extract_tool_calls,
    render_trajectory,
    run_solver,
)
from ..errors import (
    BackendError,
    ConfigError,
    ContractError,
    ParseError,
    PretaskError,
)
from ..gateway import (
    Gateway,
    SyntheticTask,
    ValidationVerdict,
    build_env_summary_prompt,
    build_task_generation_prompt,
    build_validator_prompt,
    parse_env_summary,
    parse_task_batch,
    parse_verdict,
)
from ..gateway.client import CallRecord
from ..induction import InductionResult, induce_detailed
from ..memory import (
    EnvObservation,
    PracticeRecord,
    ProposerMemory,
    SolverMemory,
    render_proposer_context,
    serialize_memory,
)
from . import checkpoint as ckpt
from .config import RunConfig
from .runlog import RunLog

logger = logging.getLogger(__name__)

UNPARSEABLE_VERDICT_REASON = "validator output could not be parsed"
MISSING_REASON = "validator gave no rationale"


class RunAborted(PretaskError):
    """The backend gave out mid-run; the last boundary checkpoint is intact."""

    def __init__(self, message: str, checkpoint_dir: Path | None, iteration: int, task_index: int):
        self.checkpoint_dir = checkpoint_dir
        self.iteration = iteration
        self.task_index = task_index
        super().__init__(message)


class ConstructionResult(NamedTuple):
    proposer: ProposerMemory
    solver: SolverMemory
    log: RunLog


# verdict classification


def is_feasible(verdict: ValidationVerdict, config: RunConfig | None = None) -> bool:
    config = config or RunConfig()
    return verdict.feasibility_score >= config.feasibility_admit_threshold


def classify_outcome(verdict: ValidationVerdict, config: RunConfig | None = None) -> str:
    config = config or RunConfig()
    if verdict.feasibility_score <= config.infeasible_label_max:
        return "infeasible"
    if verdict.completion_score >= config.completion_success_threshold:
        return "solved"
    return "failed"


# memory updates


def update_proposer(
    memory: ProposerMemory,
    task: SyntheticTask,
    trajectory: Trajectory,
    verdict: ValidationVerdict | None,
    env_summary_result: Sequence[str] | None,
    config: RunConfig | None = None,
) -> ProposerMemory:
    """Append one practice record, merge tool counts, maybe add an observation.

    A None verdict (unparseable validator output) is recorded as a failure.
    """
    tool_calls = extract_tool_calls(trajectory)
    if verdict is None:
        outcome, reason = "failed", UNPARSEABLE_VERDICT_REASON
    else:
        outcome = classify_outcome(verdict, config)
        if outcome == "infeasible":
            reason = verdict.feasibility_reason
        else:
            reason = verdict.completion_reason
        if outcome != "solved" and not reason.strip():
            reason = MISSING_REASON
    record = PracticeRecord(
        task_id=task.task_id,
        iteration=task.iteration,
        instruction=task.instruction,
        outcome=outcome,
        invoked_tools=tuple(tool_calls),
        reason=reason,
    )
    observations = memory.observations
    if env_summary_result and outcome != "infeasible":
        observations = observations + (
            EnvObservation(len(observations) + 1, task.task_id, tuple(env_summary_result)[:5]),
        )
    return ProposerMemory(
        records=memory.records + (record,),
        usage=memory.usage.merged(tool_calls),
        observations=observations,
    )


def _update_solver_detailed(
    memory: SolverMemory,
    task: SyntheticTask,
    trajectory: Trajectory,
    verdict: ValidationVerdict,
    gateway: Gateway,
    config: RunConfig,
    env_name: str,
) -> InductionResult:
    if not is_feasible(verdict, config):
        raise ContractError(
            f"update_solver called for {task.task_id} with feasibility "
            f"{verdict.feasibility_score} < {config.feasibility_admit_threshold}"
        )
    return induce_detailed(
        task, trajectory, verdict, memory, gateway, env_name, config.trajectory_render_cap
    )


def update_solver(
    memory: SolverMemory,
    task: SyntheticTask,
    trajectory: Trajectory,
    verdict: ValidationVerdict,
    gateway: Gateway,
    config: RunConfig | None = None,
    env_name: str = "agent",
) -> SolverMemory:
    """Induce from an admitted task; raises ContractError if the verdict is not feasible."""
    config = config or RunConfig()
    return _update_solver_detailed(memory, task, trajectory, verdict, gateway, config, env_name).memory


# helpers


def task_seed(run_seed: int, task_id: str) -> int:
    """Environment seed for one task, stable across runs and resumes."""
    digest = hashlib.sha256(f"{run_seed}:{task_id}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _task_dict(task: SyntheticTask) -> dict[str, Any]:
    return {
        "task_id": task.task_id,
        "iteration": task.iteration,
        "servers": list(task.servers),
        "instruction": task.instruction,
        "intended_functions": list(task.intended_functions),
    }


def _verdict_dict(verdict: ValidationVerdict | None) -> dict[str, Any] | None:
    if verdict is None:
        return None
    return {
        "feasibility_score": verdict.feasibility_score,
        "feasibility_reason": verdict.feasibility_reason,
        "completion_score": verdict.completion_score,
        "completion_reason": verdict.completion_reason,
    }


def cost_listener(log: RunLog) -> Callable[[CallRecord], None]:
    def listen(record: CallRecord) -> None:
        log.emit(
            "cost",
            phase=record.phase,
            role=record.role,
            index=record.index,
            temperature=record.temperature,
            usage=record.usage.to_dict(),
            prompt_sha256=digest(record.prompt),
        )

    return listen


Observer = Callable[[SyntheticTask, "ValidationVerdict | None", str, ProposerMemory, SolverMemory], None]


@dataclass
class _State:
    proposer: ProposerMemory
    solver: SolverMemory


class _Runner:
    def __init__(
        self,
        config: RunConfig,
        env_factory: EnvironmentFactory,
        gateway: Gateway,
        log: RunLog,
        observer: Observer | None,
    ):
        self.config = config
        self.env_factory = env_factory
        self.gateway = gateway
        self.log = log
        self.observer = observer
        probe = env_factory(config.seed)
        self.docs = probe.list_documentation()
        self.env_name = getattr(probe, "name", "environment")

    def warn(self, role: str, task_id: str | None) -> Callable[[str], None]:
        def emit(message: str) -> None:
            self.log.emit("parse_warning", role=role, task_id=task_id, message=message)

        return emit

    def propose(self, iteration: int, state: _State) -> list[SyntheticTask]:
        cfg = self.config
        context = render_proposer_context(state.proposer, cfg.limits)
        request = build_task_generation_prompt(self.docs, context, cfg.batch_size, self.env_name)
        response = self.gateway.complete(request)
        try:
            tasks = parse_task_batch(response, iteration, self.warn("proposer", None))
        except ParseError as exc:
            logger.warning("iteration %d: %s", iteration, exc)
            self.log.emit("skipped", iteration=iteration, task_id=None, reason=f"batch unparseable: {exc}")
            tasks = []
        if len(tasks) > cfg.batch_size:
            extra = [t.task_id for t in tasks[cfg.batch_size :]]
            self.log.emit("skipped", iteration=iteration, task_id=None, reason=f"extra tasks dropped: {extra}")
            tasks = tasks[: cfg.batch_size]
        shortfall = cfg.batch_size - len(tasks)
        if shortfall:
            logger.warning("iteration %d: batch shortfall of %d task(s)", iteration, shortfall)
        self.log.emit(
            "task_proposed",
            iteration=iteration,
            requested=cfg.batch_size,
            shortfall=shortfall,
            execution_mode="parallel" if cfg.parallel_batch else "sequential",
            tasks=[_task_dict(t) for t in tasks],
        )
        return tasks

    def execute(self, task: SyntheticTask, solver: SolverMemory) -> tuple[Trajectory, int]:
        seed = task_seed(self.config.seed, task.task_id)
        env = self.env_factory(seed)
        trajectory = run_solver(
            task, solver, env, self.gateway, self.config.step_limit, self.config.trajectory_render_cap
        )
        return trajectory, seed

    def record_execution(self, task: SyntheticTask, trajectory: Trajectory, seed: int) -> None:
        self.log.emit(
            "task_executed",
            task_id=task.task_id,
            iteration=task.iteration,
            env_seed=seed,
            terminal=trajectory.terminal,
            steps=len(trajectory.steps),
            tool_calls=extract_tool_calls(trajectory),
            trajectory=trajectory.to_dict(),
        )

    def settle(self, task: SyntheticTask, trajectory: Trajectory, state: _State) -> None:
        """Validate, then update proposer memory and (if admitted) solver memory."""
        cfg = self.config
        text = render_trajectory(trajectory, cfg.trajectory_render_cap)
        verdict: ValidationVerdict | None
        try:
            verdict = parse_verdict(
                self.gateway.complete(build_validator_prompt(task, text, self.env_name)),
                self.warn("validator", task.task_id),
            )
        except ParseError as exc:
            logger.warning("%s: %s", task.task_id, exc)
            verdict = None
        admitted = verdict is not None and is_feasible(verdict, cfg)
        outcome = "failed" if verdict is None else classify_outcome(verdict, cfg)
        self.log.emit(
            "verdict",
            task_id=task.task_id,
            verdict=_verdict_dict(verdict),
            outcome=outcome,
            admitted=admitted,
        )

        summary: list[str] | None = None
        if verdict is not None and outcome != "infeasible":
            try:
                summary = parse_env_summary(
                    self.gateway.complete(build_env_summary_prompt(task, text, self.env_name)),
                    self.warn("env_summarizer", task.task_id),
                )
            except ParseError as exc:
                self.log.emit("parse_warning", role="env_summarizer", task_id=task.task_id, message=str(exc))
        state.proposer = update_proposer(state.proposer, task, trajectory, verdict, summary, cfg)
        record = state.proposer.records[-1]
        self.log.emit(
            "proposer_update",
            task_id=task.task_id,
            iteration=task.iteration,
            outcome=record.outcome,
            invoked_tools=list(record.invoked_tools),
            tool_calls=extract_tool_calls(trajectory),
            observation_added=bool(summary) and outcome != "infeasible",
            records=len(state.proposer.records),
        )

        if admitted:
            before = serialize_memory(state.solver)
            result = _update_solver_detailed(
                state.solver, task, trajectory, verdict, self.gateway, cfg, self.env_name
            )
            for message in result.warnings:
                self.log.emit("parse_warning", role="induction", task_id=task.task_id, message=message)
            state.solver = result.memory
            after = serialize_memory(state.solver)
            self.log.emit(
                "solver_update",
                task_id=task.task_id,
                changed=before != after,
                before_sha256=digest(before),
                after_sha256=digest(after),
                added_ids=result.added_ids,
                unknown_tag_ids=result.unknown_tag_ids,
                skipped_duplicates=result.skipped_duplicates,
                error=result.error,
                bullets=len(state.solver),
            )
        else:
            self.log.emit("skipped", iteration=task.iteration, task_id=task.task_id, reason="not admitted")
        if self.observer is not None:
            self.observer(task, verdict, outcome, state.proposer, state.solver)

    def run_iteration(self, iteration: int, state: _State, on_task: Callable[[int], None]) -> None:
        tasks = self.propose(iteration, state)
        if not self.config.parallel_batch:
            for i, task in enumerate(tasks):
                trajectory, seed = self.execute(task, state.solver)
                self.record_execution(task, trajectory, seed)
                self.settle(task, trajectory, state)
                on_task(i + 1)
            return
        frozen = state.solver
        with ThreadPoolExecutor(max_workers=self.config.max_workers) as pool:
            runs = list(pool.map(lambda t: self.execute(t, frozen), tasks))
        for i, (task, (trajectory, seed)) in enumerate(zip(tasks, runs)):
            self.record_execution(task, trajectory, seed)
            self.settle(task, trajectory, state)
            on_task(i + 1)


def construct(
    config: RunConfig,
    env_factory: EnvironmentFactory,
    gateway: Gateway,
    *,
    initial: tuple[ProposerMemory, SolverMemory] | None = None,
    checkpoint_dir: str | Path | None = None,
    resume: bool = True,
    observer: Observer | None = None,
    config_document: dict[str, Any] | None = None,
) -> ConstructionResult:
    """Run ``config.iterations`` rounds of propose / execute / validate / update.

    With ``checkpoint_dir`` set, both memories, the cursor and the config are
    written after every iteration and the run log is appended live. If the
    directory already holds a cursor and ``resume`` is true, the run picks up
    after the last completed iteration.
    """
    directory = Path(checkpoint_dir) if checkpoint_dir is not None else None
    gateway.phase = "construction"
    proposer, solver = initial if initial is not None else (ProposerMemory.empty(), SolverMemory.empty())
    start = 1
    log = RunLog()

    cursor = ckpt.read_cursor(directory) if directory is not None and resume else None
    if directory is not None:
        directory.mkdir(parents=True, exist_ok=True)
        config_text = ckpt.dump_json(config_document if config_document is not None else config.to_dict())
        config_path = directory / ckpt.CONFIG_FILE
        if cursor is not None:
            if config_path.exists() and config_path.read_text(encoding="utf-8") != config_text:
                raise ConfigError(f"{config_path} differs from the current config; refusing to resume")
            proposer, solver = ckpt.read_memories(directory)
            log = RunLog.load(directory / ckpt.RUNLOG_FILE, limit=cursor.log_events)
            gateway.restore(cursor.gateway)
            start = cursor.iteration + 1
            logger.info("resuming after iteration %d", cursor.iteration)
        else:
            (directory / ckpt.CURSOR_FILE).unlink(missing_ok=True)
            ckpt.write_atomic(config_path, config_text)
            ckpt.write_memories(directory, proposer, solver)
        log.attach(directory / ckpt.RUNLOG_FILE)
        (directory / ckpt.ABORT_FILE).unlink(missing_ok=True)

    previous_listener = gateway.listener
    gateway.listener = cost_listener(log)
    state = _State(proposer, solver)
    position = {"iteration": start, "task_index": 0}

    def on_task(done: int) -> None:
        position["task_index"] = done

    try:
        runner = _Runner(config, env_factory, gateway, log, observer)
        for iteration in range(start, config.iterations + 1):
            position.update(iteration=iteration, task_index=0)
            runner.run_iteration(iteration, state, on_task)
            if directory is not None:
                ckpt.write_memories(directory, state.proposer, state.solver)
                ckpt.write_cursor(
                    directory,
                    ckpt.Cursor(iteration, position["task_index"], len(log.events), gateway.state()),
                )
            logger.info(
                "iteration %d done: %d records, %d bullets",
                iteration, len(state.proposer.records), len(state.solver),
            )
    except (BackendError, KeyboardInterrupt) as exc:
        message = f"run aborted in iteration {position['iteration']} after task {position['task_index']}: {exc!r}"
        logger.error(message)
        if directory is not None:
            ckpt.write_memories(directory / ckpt.PARTIAL_DIR, state.proposer, state.solver)
            ckpt.write_atomic(
                directory / ckpt.ABORT_FILE,
                ckpt.dump_json({**position, "error": str(exc) or type(exc).__name__}),
            )
        raise RunAborted(message, directory, position["iteration"], position["task_index"]) from exc
    finally:
        gateway.listener = previous_listener
        log.path = None
    return ConstructionResult(state.proposer, state.solver, log)


def admitted_count(log: RunLog) -> int:
    return sum(1 for e in log.of_kind("verdict") if e["payload"]["admitted"])
