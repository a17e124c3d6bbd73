"""Construction-side metrics, deployment curves, and the token cost model."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from typing import Any, Iterable, Mapping, Sequence

from .environment import Trajectory, extract_tool_calls
from .errors import UndefinedMetricError
from .gateway import TokenUsage
from .memory import PracticeRecord, ProposerMemory

ToolSource = PracticeRecord | Trajectory | Iterable[str]


def _tools_of(item: ToolSource) -> list[str]:
    if isinstance(item, PracticeRecord):
        return list(item.invoked_tools)
    if isinstance(item, Trajectory):
        return extract_tool_calls(item)
    if isinstance(item, str):
        return [item]
    return list(item)


def is_excluded(tool: str, exclude: Iterable[str]) -> bool:
    return any(fnmatchcase(tool, pattern) for pattern in exclude)


def infeasible_rate(records: Sequence[PracticeRecord]) -> float:
    if not records:
        raise UndefinedMetricError("infeasible_rate of an empty record list")
    return sum(1 for r in records if r.outcome == "infeasible") / len(records)


def unique_tools(items: Iterable[ToolSource], exclude: Iterable[str] = ()) -> int:
    """Distinct tools across ``items`` (records, trajectories, or tool lists)."""
    exclude = tuple(exclude)
    seen = {t for item in items for t in _tools_of(item)}
    return sum(1 for t in seen if not is_excluded(t, exclude))


def tool_entropy(counts: Mapping[str, int | float]) -> float:
    """Shannon entropy in bits of the normalized count distribution."""
    if any(c < 0 for c in counts.values()):
        raise ValueError("counts must be non-negative")
    total = sum(counts.values())
    if total <= 0:
        raise UndefinedMetricError("tool_entropy needs at least one positive count")
    entropy = 0.0
    for count in counts.values():
        if count > 0:
            p = count / total
            entropy -= p * math.log2(p)
    # -0.0 and rounding dust below zero on single-support inputs
    return max(entropy, 0.0)


def weighted_recall(covered: Iterable[str], test_freq: Mapping[str, int | float]) -> float:
    total = sum(v for v in test_freq.values() if v > 0)
    if total <= 0:
        raise UndefinedMetricError("weighted_recall needs a positive test frequency")
    covered = set(covered)
    hit = sum(v for t, v in test_freq.items() if v > 0 and t in covered)
    return hit / total


def coverage_curve(items: Iterable[ToolSource], exclude: Iterable[str] = ()) -> list[int]:
    exclude = tuple(exclude)
    seen: set[str] = set()
    curve = []
    for item in items:
        seen.update(t for t in _tools_of(item) if not is_excluded(t, exclude))
        curve.append(len(seen))
    return curve


def prefix_success_curve(results: Iterable[bool]) -> list[float]:
    curve = []
    hits = 0
    for k, ok in enumerate(results, start=1):
        hits += bool(ok)
        curve.append(hits / k)
    return curve


# cost model


@dataclass(frozen=True)
class CostTable:
    """Prices per one million tokens."""

    cache_hit_input_per_m: float = 0.028
    cache_miss_input_per_m: float = 0.28
    output_per_m: float = 0.42

    def __post_init__(self) -> None:
        if min(self.cache_hit_input_per_m, self.cache_miss_input_per_m, self.output_per_m) < 0:
            raise ValueError("prices must be non-negative")

    def price(self, usage: TokenUsage) -> float:
        return (
            usage.cache_hit_input * self.cache_hit_input_per_m
            + usage.cache_miss_input * self.cache_miss_input_per_m
            + usage.output * self.output_per_m
        ) / 1e6


BUCKETS = ("Gen.", "Val.", "Syn. solve", "Eval solve", "Mem. update")


def bucket_of(phase: str, role: str) -> str:
    if role == "proposer":
        return "Gen."
    if role == "validator":
        return "Val."
    if role == "solver":
        return "Eval solve" if phase == "evaluation" else "Syn. solve"
    return "Mem. update"


@dataclass(frozen=True)
class CostReport:
    by_role: dict[str, float]
    by_phase: dict[str, float]
    by_bucket: dict[str, float]
    by_phase_bucket: dict[str, dict[str, float]]
    total: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "total": self.total,
            "by_phase": self.by_phase,
            "by_role": self.by_role,
            "by_bucket": self.by_bucket,
            "by_phase_bucket": self.by_phase_bucket,
        }


def cost_report(ledger: Mapping[tuple[str, str], TokenUsage], table: CostTable | None = None) -> CostReport:
    """Price a (phase, role) token ledger and aggregate it several ways."""
    table = table or CostTable()
    by_role: Counter[str] = Counter()
    by_phase: Counter[str] = Counter()
    by_bucket: dict[str, float] = {b: 0.0 for b in BUCKETS}
    by_phase_bucket: dict[str, dict[str, float]] = {}
    total = 0.0
    for (phase, role), usage in sorted(ledger.items()):
        cost = table.price(usage)
        bucket = bucket_of(phase, role)
        by_role[role] += cost
        by_phase[phase] += cost
        by_bucket[bucket] += cost
        by_phase_bucket.setdefault(phase, {})
        by_phase_bucket[phase][bucket] = by_phase_bucket[phase].get(bucket, 0.0) + cost
        total += cost
    return CostReport(dict(sorted(by_role.items())), dict(sorted(by_phase.items())), by_bucket, by_phase_bucket, total)


def ledger_from_events(events: Iterable[Mapping[str, Any]]) -> dict[tuple[str, str], TokenUsage]:
    """Rebuild a token ledger from ``cost`` run-log events."""
    ledger: dict[tuple[str, str], TokenUsage] = {}
    for event in events:
        if event.get("kind") != "cost":
            continue
        p = event["payload"]
        key = (p["phase"], p["role"])
        ledger[key] = ledger.get(key, TokenUsage()) + TokenUsage.from_dict(p["usage"])
    return ledger


# reports


@dataclass
class MetricReport:
    infeasible_rate: float
    unique_tools: int
    tool_entropy_bits: float
    weighted_recall: float | None = None
    series: list[dict[str, Any]] = field(default_factory=list)
    cost: CostReport | None = None

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "infeasible_rate": self.infeasible_rate,
            "unique_tools": self.unique_tools,
            "tool_entropy_bits": self.tool_entropy_bits,
        }
        if self.weighted_recall is not None:
            doc["weighted_recall"] = self.weighted_recall
        doc["series"] = {"per_iteration": self.series}
        doc["cost"] = self.cost.to_dict() if self.cost is not None else {}
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        rows = [
            ("infeasible_rate", f"{self.infeasible_rate:.4f}"),
            ("unique_tools", str(self.unique_tools)),
            ("tool_entropy_bits", f"{self.tool_entropy_bits:.4f}"),
        ]
        if self.weighted_recall is not None:
            rows.append(("weighted_recall", f"{self.weighted_recall:.4f}"))
        if self.cost is not None:
            rows.append(("cost_total", f"{self.cost.total:.6f}"))
            rows.extend((f"cost[{b}]", f"{v:.6f}") for b, v in self.cost.by_bucket.items())
        width = max(len(name) for name, _ in rows)
        lines = [f"{name.ljust(width)}  {value}" for name, value in rows]
        if self.series:
            metrics = [k for k in self.series[0] if k != "iteration"]
            lines.append("")
            lines.append("  ".join(["iteration"] + metrics))
            for point in self.series:
                cells = [str(point["iteration"])]
                for m in metrics:
                    value = point.get(m)
                    cells.append("-" if value is None else (f"{value:.4f}" if isinstance(value, float) else str(value)))
                lines.append("  ".join(cells))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "metric", "value"])
        for point in self.series:
            for metric, value in point.items():
                if metric != "iteration" and value is not None:
                    writer.writerow([point["iteration"], metric, value])
        return buf.getvalue()


def _safe(fn, *args) -> float | None:
    try:
        return fn(*args)
    except UndefinedMetricError:
        return None


def per_iteration_series(
    events: Iterable[Mapping[str, Any]],
    exclude: Iterable[str] = (),
    test_freq: Mapping[str, int | float] | None = None,
) -> list[dict[str, Any]]:
    """Cumulative metrics after each iteration, replayed from ``proposer_update`` events."""
    exclude = tuple(exclude)
    outcomes: list[str] = []
    counts: Counter[str] = Counter()
    by_iteration: dict[int, dict[str, Any]] = {}
    for event in events:
        if event.get("kind") != "proposer_update":
            continue
        p = event["payload"]
        outcomes.append(p["outcome"])
        counts.update(t for t in p["tool_calls"] if not is_excluded(t, exclude))
        point: dict[str, Any] = {
            "iteration": p["iteration"],
            "records": len(outcomes),
            "infeasible_rate": outcomes.count("infeasible") / len(outcomes),
            "unique_tools": sum(1 for c in counts.values() if c > 0),
            "tool_entropy_bits": _safe(tool_entropy, counts) or 0.0,
        }
        if test_freq is not None:
            point["weighted_recall"] = _safe(weighted_recall, set(counts), _filtered(test_freq, exclude))
        by_iteration[p["iteration"]] = point
    return [by_iteration[k] for k in sorted(by_iteration)]


def _filtered(freq: Mapping[str, int | float], exclude: tuple[str, ...]) -> dict[str, int | float]:
    return {t: v for t, v in freq.items() if not is_excluded(t, exclude)}


def build_report(
    proposer: ProposerMemory,
    events: Sequence[Mapping[str, Any]] = (),
    test_freq: Mapping[str, int | float] | None = None,
    exclude: Iterable[str] = (),
    table: CostTable | None = None,
) -> MetricReport:
    """Headline metrics from proposer memory, series and cost from the run log.

    Meta tools matching ``exclude`` are left out of every tool metric.
    """
    exclude = tuple(exclude)
    counts = {t: c for t, c in proposer.usage.tool_counts.items() if not is_excluded(t, exclude)}
    covered = {t for t, c in counts.items() if c > 0}
    recall = None
    if test_freq is not None:
        recall = weighted_recall(covered, _filtered(test_freq, exclude))
    return MetricReport(
        infeasible_rate=infeasible_rate(proposer.records),
        unique_tools=unique_tools(proposer.records, exclude),
        tool_entropy_bits=_safe(tool_entropy, counts) or 0.0,
        weighted_recall=recall,
        series=per_iteration_series(events, exclude, test_freq),
        cost=cost_report(ledger_from_events(events), table),
    )
