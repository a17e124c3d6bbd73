"""Brute-force reference implementations, deliberately written differently from the package."""

from __future__ import annotations

import math
import random


def entropy_oracle(counts: dict[str, int]) -> float:
    # H = log2(N) - (1/N) * sum(c * log2 c), over positive counts
    total = sum(counts.values())
    acc = 0.0
    for c in counts.values():
        if c:
            acc += c * math.log2(c)
    return math.log2(total) - acc / total


def recall_oracle(covered: set[str], freq: dict[str, int]) -> float:
    num = 0
    den = 0
    for tool in sorted(freq):
        den += freq[tool]
        if tool in covered:
            num += freq[tool]
    return num / den


def infeasible_oracle(outcomes: list[str]) -> float:
    return len([o for o in outcomes if o == "infeasible"]) / len(outcomes)


def coverage_oracle(tasks: list[list[str]]) -> list[int]:
    return [len(set().union(*tasks[: k + 1])) for k in range(len(tasks))]


def prefix_oracle(results: list[bool]) -> list[float]:
    return [sum(1 for r in results[: k + 1] if r) / (k + 1) for k in range(len(results))]


def close(a: float, b: float, rel: float = 1e-9) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-12)


def random_instance(rng: random.Random) -> dict:
    n_tools = rng.randint(1, 20)
    tools = [f"app{rng.randint(0, 4)}.t{i}" for i in range(n_tools)]
    counts = {t: rng.randint(0, 30) for t in tools}
    if not any(counts.values()):
        counts[tools[0]] = 1
    freq = {t: rng.randint(0, 30) for t in tools}
    if not any(freq.values()):
        freq[tools[-1]] = 1
    covered = {t for t in tools if rng.random() < 0.5}
    n_tasks = rng.randint(1, 50)
    tasks = [rng.sample(tools, k=rng.randint(0, min(4, len(tools)))) for _ in range(n_tasks)]
    outcomes = [rng.choice(("solved", "failed", "infeasible")) for _ in range(n_tasks)]
    results = [rng.random() < 0.5 for _ in range(n_tasks)]
    return {"counts": counts, "freq": freq, "covered": covered, "tasks": tasks,
            "outcomes": outcomes, "results": results}


def compare_all(instance: dict) -> list[str]:
    """Names of metrics that disagree with their oracle on ``instance``."""
    from pretask.diagnostics import (
        coverage_curve,
        infeasible_rate,
        prefix_success_curve,
        tool_entropy,
        weighted_recall,
    )
    from pretask.memory import PracticeRecord

    bad = []
    if not close(tool_entropy(instance["counts"]), entropy_oracle(instance["counts"])):
        bad.append("tool_entropy")
    if not close(weighted_recall(instance["covered"], instance["freq"]),
                 recall_oracle(instance["covered"], instance["freq"])):
        bad.append("weighted_recall")
    records = [PracticeRecord(f"t{i}", 1, "x", o, (), "r") for i, o in enumerate(instance["outcomes"])]
    if not close(infeasible_rate(records), infeasible_oracle(instance["outcomes"])):
        bad.append("infeasible_rate")
    if coverage_curve(instance["tasks"]) != coverage_oracle(instance["tasks"]):
        bad.append("coverage_curve")
    got = prefix_success_curve(instance["results"])
    want = prefix_oracle(instance["results"])
    if len(got) != len(want) or not all(close(a, b) for a, b in zip(got, want)):
        bad.append("prefix_success_curve")
    return bad
