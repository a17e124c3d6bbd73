"""Command-line entry point: construct, seed, online, inspect, metrics.

Exit codes: 0 success, 1 config or input error, 2 run aborted with a
resumable checkpoint.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Sequence

from . import construction as cons
from .construction.checkpoint import (
    CONFIG_FILE,
    RUNLOG_FILE,
    dump_json,
    read_memories,
    write_atomic,
    write_memories,
)
from .diagnostics import CostTable, build_report, cost_report, prefix_success_curve
from .environment import get_environment
from .errors import ConfigError, PretaskError
from .gateway import Gateway, HttpBackend, ScriptedBackend
from .memory import (
    ProposerMemory,
    SolverMemory,
    deserialize_memory,
    render_playbook,
    render_proposer_context,
    serialize_memory,
)

logger = logging.getLogger("pretask")

EXIT_OK, EXIT_ERROR, EXIT_ABORTED = 0, 1, 2

DEFAULT_CONFIG: dict[str, Any] = {
    "environment": {"name": "miniworld", "seed": 0},
    "backend": {
        "kind": "scripted",
        "fixtures": None,
        "endpoint": None,
        "model": None,
        "token_env": "PRETASK_API_TOKEN",
        "temperatures": {},
        "timeout": 120.0,
        "retry_limit": 3,
        "backoff_base": 1.0,
    },
    "run": {},
    "output_dir": "out",
    "cost": {},
    "metrics": {"exclude": None},
}


# config handling


def _merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _set_dotted(doc: dict[str, Any], dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = doc
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        if not isinstance(child, dict):
            raise ConfigError(f"override {dotted}: {part} is not a section")
        node = child
    node[parts[-1]] = value


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(extra: Sequence[str]) -> list[tuple[str, Any]]:
    """``--run.iterations 3`` / ``--run.iterations=3`` pairs; values are JSON when they parse."""
    overrides = []
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--") or "." not in token.split("=", 1)[0]:
            raise ConfigError(f"unrecognized argument {token!r}")
        if "=" in token:
            key, raw = token[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"override {token} needs a value")
            key, raw = token[2:], extra[i + 1]
            i += 2
        overrides.append((key, _parse_value(raw)))
    return overrides


@dataclass
class CliConfig:
    document: dict[str, Any]
    base_dir: Path

    @property
    def env_name(self) -> str:
        return self.document["environment"]["name"]

    @property
    def output_dir(self) -> Path:
        return self._path(self.document["output_dir"])

    def _path(self, value: str) -> Path:
        path = Path(value)
        return path if path.is_absolute() else self.base_dir / path

    def run_config(self) -> cons.RunConfig:
        run = dict(self.document.get("run") or {})
        run.setdefault("seed", self.document["environment"].get("seed", 0))
        return cons.RunConfig.from_dict(run)

    def cost_table(self) -> CostTable:
        try:
            return CostTable(**(self.document.get("cost") or {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad cost table: {exc}") from exc

    def env_factory(self):
        try:
            return get_environment(self.env_name).factory
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from exc

    def meta_tools(self) -> tuple[str, ...]:
        exclude = (self.document.get("metrics") or {}).get("exclude")
        if exclude is not None:
            return tuple(exclude)
        try:
            return get_environment(self.env_name).meta_tools
        except KeyError:
            return ()

    def gateway(self) -> Gateway:
        spec = self.document["backend"]
        kind = spec.get("kind")
        if kind == "scripted":
            if not spec.get("fixtures"):
                raise ConfigError("scripted backend requires backend.fixtures")
            backend = ScriptedBackend.from_jsonl(self._path(spec["fixtures"]))
        elif kind == "live":
            if not spec.get("endpoint") or not spec.get("model"):
                raise ConfigError("live backend requires backend.endpoint and backend.model")
            backend = HttpBackend(
                spec["endpoint"],
                spec["model"],
                spec.get("token_env") or "PRETASK_API_TOKEN",
                spec.get("temperatures") or {},
                float(spec.get("timeout", 120.0)),
            )
        else:
            raise ConfigError(f"unknown backend kind {kind!r} (expected scripted or live)")
        return Gateway(
            backend,
            retry_limit=int(spec.get("retry_limit", 3)),
            backoff_base=float(spec.get("backoff_base", 1.0)),
            keep_history=False,
        )


def load_config(args: argparse.Namespace, overrides: Sequence[tuple[str, Any]]) -> CliConfig:
    doc = copy.deepcopy(DEFAULT_CONFIG)
    base_dir = Path.cwd()
    if args.config:
        path = Path(args.config)
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        unknown = sorted(set(loaded) - set(DEFAULT_CONFIG))
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
        doc = _merge(doc, loaded)
        base_dir = path.resolve().parent
    for key, value in overrides:
        _set_dotted(doc, key, value)
    if args.out is not None:
        doc["output_dir"] = str(Path(args.out).resolve())
    if args.seed is not None:
        _set_dotted(doc, "run.seed", args.seed)
    if args.backend is not None:
        doc["backend"]["kind"] = args.backend
    if args.parallel_batch:
        _set_dotted(doc, "run.parallel_batch", True)
    config = CliConfig(doc, base_dir)
    config.run_config()  # validate early
    return config


# commands


def cmd_construct(args: argparse.Namespace, config: CliConfig) -> int:
    run = config.run_config()
    out = config.output_dir
    gateway = config.gateway()
    initial = None
    if args.init_from:
        initial = read_memories(Path(args.init_from))
    try:
        result = cons.construct(
            run,
            config.env_factory(),
            gateway,
            initial=initial,
            checkpoint_dir=out,
            resume=not args.fresh,
            config_document=config.document,
        )
    except cons.RunAborted as exc:
        print(f"aborted: {exc}; checkpoint in {out} (rerun to resume)", file=sys.stderr)
        return EXIT_ABORTED
    cost = cost_report(gateway.ledger, config.cost_table())
    print(
        f"records={len(result.proposer.records)} admitted={cons.admitted_count(result.log)} "
        f"bullets={len(result.solver)} cost={cost.total:.6f} out={out}"
    )
    return EXIT_OK


def _read_jsonl(path: Path) -> list[Any]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    items = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            try:
                items.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{lineno}: not valid JSON ({exc.msg})") from exc
    return items


def cmd_seed(args: argparse.Namespace, config: CliConfig) -> int:
    pairs = [cons.seed_pair_from_dict(d, i) for i, d in enumerate(_read_jsonl(Path(args.pairs)))]
    if not pairs:
        raise ConfigError(f"{args.pairs}: no seed pairs")
    gateway = config.gateway()
    env_name = getattr(config.env_factory()(0), "name", "environment")
    proposer, solver = cons.seed_from_tasks(pairs, config.run_config(), gateway, env_name)
    out = config.output_dir
    write_memories(out, proposer, solver)
    print(f"seeded records={len(proposer.records)} bullets={len(solver)} out={out}")
    return EXIT_OK


def _load_solver(path: Path) -> SolverMemory:
    if path.is_dir():
        path = path / "solver_memory.json"
    try:
        memory = deserialize_memory(path.read_text(encoding="utf-8"), "solver")
    except OSError as exc:
        raise ConfigError(f"cannot read memory {path}: {exc.strerror or exc}") from exc
    return memory


def cmd_online(args: argparse.Namespace, config: CliConfig) -> int:
    memory = _load_solver(Path(args.memory))
    tasks = [cons.OnlineTask.from_dict(d, i) for i, d in enumerate(_read_jsonl(Path(args.tasks)))]
    gateway = config.gateway()
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    log = cons.RunLog()
    memory, results = cons.online_continue(
        memory, tasks, config.env_factory(), gateway, config.run_config(),
        frozen=args.frozen, log=log,
    )
    curve = prefix_success_curve(r.success for r in results)
    write_atomic(out / "solver_memory.json", serialize_memory(memory))
    write_atomic(
        out / "online_results.jsonl",
        "".join(json.dumps(r.__dict__, sort_keys=True) + "\n" for r in results),
    )
    write_atomic(out / "prefix_success.txt", "".join(f"{v!r}\n" for v in curve))
    write_atomic(out / RUNLOG_FILE, log.to_jsonl())
    cost = cost_report(gateway.ledger, config.cost_table())
    write_atomic(out / "cost.json", dump_json(cost.to_dict()))
    solved = sum(r.success for r in results)
    print(
        f"tasks={len(results)} solved={solved} mem_update_cost={cost.by_bucket['Mem. update']:.6f} "
        f"cost={cost.total:.6f} out={out}"
    )
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace, config: CliConfig | None) -> int:
    path = Path(args.path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read memory {path}: {exc.strerror or exc}") from exc
    memory = deserialize_memory(text)
    if args.format == "json":
        sys.stdout.write(serialize_memory(memory))
    elif isinstance(memory, SolverMemory):
        print(render_playbook(memory))
    else:
        assert isinstance(memory, ProposerMemory)
        limits = config.run_config().limits if config is not None else cons.RunConfig().limits
        print(render_proposer_context(memory, limits))
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace, config: CliConfig) -> int:
    directory = Path(args.checkpoint)
    if not directory.is_dir():
        raise ConfigError(f"checkpoint directory not found: {directory}")
    proposer, _ = read_memories(directory)
    try:
        events = cons.RunLog.load(directory / RUNLOG_FILE).events
    except (json.JSONDecodeError, OSError) as exc:
        raise ConfigError(f"cannot read {directory / RUNLOG_FILE}: {exc}") from exc
    exclude = config.meta_tools()
    saved = directory / CONFIG_FILE
    if args.config is None and saved.exists() and not args.exclude:
        try:
            doc = json.loads(saved.read_text(encoding="utf-8"))
            exclude = CliConfig(_merge(DEFAULT_CONFIG, doc), directory).meta_tools() if "environment" in doc else exclude
        except (json.JSONDecodeError, AttributeError):
            pass
    if args.exclude:
        exclude = tuple(args.exclude)
    test_freq = None
    if args.test_freq:
        try:
            test_freq = json.loads(Path(args.test_freq).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read test frequencies {args.test_freq}: {exc}") from exc
        if not isinstance(test_freq, dict):
            raise ConfigError(f"{args.test_freq} must be a JSON object of tool -> count")
    report = build_report(proposer, events, test_freq, exclude, config.cost_table())
    if args.format == "json":
        sys.stdout.write(report.to_json())
    elif args.format == "csv":
        sys.stdout.write(report.to_csv())
    else:
        sys.stdout.write(report.to_text())
    return EXIT_OK


# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="run seed (overrides run.seed)")
    common.add_argument("--backend", choices=("scripted", "live"), help="backend kind")
    common.add_argument("--parallel-batch", action="store_true", help="run each batch's solver calls concurrently")
    common.add_argument("--frozen", action="store_true", help="online: never update memory")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="pretask",
        description="Build agent memory from synthetic practice before deployment.",
        epilog="Any config field can be overridden with its dotted name, e.g. --run.iterations 3.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", parents=[common], help="run the construction loop")
    p.add_argument("--fresh", action="store_true", help="ignore an existing checkpoint cursor")
    p.add_argument("--init-from", help="start from the memories in this checkpoint directory")
    p.set_defaults(handler=cmd_construct)

    p = sub.add_parser("seed", parents=[common], help="build starting memories from solved tasks")
    p.add_argument("pairs", help="JSONL file of {instruction, trajectory, verdict?}")
    p.set_defaults(handler=cmd_seed)

    p = sub.add_parser("online", parents=[common], help="deploy memory on a task stream")
    p.add_argument("--memory", required=True, help="solver_memory.json or a checkpoint directory")
    p.add_argument("--tasks", required=True, help="JSONL task stream")
    p.set_defaults(handler=cmd_online)

    p = sub.add_parser("inspect", parents=[common], help="render a memory file")
    p.add_argument("path")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_inspect)

    p = sub.add_parser("metrics", parents=[common], help="diagnostics for a checkpoint directory")
    p.add_argument("checkpoint")
    p.add_argument("--test-freq", help="JSON object of tool -> test-time frequency")
    p.add_argument("--exclude", action="append", help="meta-tool glob to leave out (repeatable)")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.set_defaults(handler=cmd_metrics)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args, parse_overrides(extra))
        return args.handler(args, config)
    except (PretaskError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
