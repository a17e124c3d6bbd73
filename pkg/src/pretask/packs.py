"""Generators for scripted MiniWorld fixture packs.

A pack is a :class:`FixtureScript` whose per-role response sequence matches
the exact call order of a construction or online run, so runs replay without
a live model. Used by the test suite and for offline demos.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Sequence

from .construction import OnlineTask, StateCheck
from .gateway import TokenUsage
from .gateway.fixtures import FixtureScript
from .memory import SECTIONS

# (feasibility, completion) per task, cycled over the whole run
DEFAULT_VERDICT_CYCLE: tuple[tuple[int, int], ...] = (
    (5, 5), (5, 3), (4, 5), (2, 1), (3, 2), (5, 4), (1, 1), (4, 2), (5, 5), (2, 3),
)
INFEASIBLE_CYCLE: tuple[tuple[int, int], ...] = ((1, 1), (2, 1), (2, 2))

ROLE_USAGE: dict[str, TokenUsage] = {
    "proposer": TokenUsage(800, 1200, 600),
    "solver": TokenUsage(1500, 300, 40),
    "validator": TokenUsage(200, 1000, 120),
    "env_summarizer": TokenUsage(200, 900, 80),
    "reflector": TokenUsage(300, 1400, 250),
    "curator": TokenUsage(300, 1600, 150),
}


@dataclass(frozen=True)
class TaskTemplate:
    question: str
    servers: tuple[str, ...]
    actions: tuple[tuple[str, dict[str, Any]], ...]
    answer: str
    hint: str


TEMPLATES: tuple[TaskTemplate, ...] = (
    TaskTemplate("List the titles of all my notes.", ("notes",),
                 (("notes.login", {}), ("notes.list_notes", {})), "listed notes",
                 "To list notes, call notes.login and then notes.list_notes"),
    TaskTemplate("Create a note titled 'groceries' with body 'milk, eggs'.", ("notes",),
                 (("notes.login", {}), ("notes.create_note", {"title": "groceries", "body": "milk, eggs"})),
                 "created", "notes.create_note needs both title and body strings after notes.login"),
    TaskTemplate("Show me the contents of note 1.", ("notes",),
                 (("notes.login", {}), ("notes.get_note", {"note_id": 1})), "shown",
                 "notes.get_note takes an integer note_id; log in to notes first"),
    TaskTemplate("Delete note 2.", ("notes",),
                 (("notes.login", {}), ("notes.delete_note", {"note_id": 2})), "deleted",
                 "Confirm the id with notes.list_notes before notes.delete_note"),
    TaskTemplate("What is my ledger balance?", ("ledger",),
                 (("ledger.login", {}), ("ledger.show_balance", {})), "balance shown",
                 "ledger.show_balance reports the balance once ledger.login has run"),
    TaskTemplate("Record a 5.00 coffee expense in the ledger.", ("ledger",),
                 (("ledger.login", {}), ("ledger.add_transaction", {"amount": -5.0, "memo": "coffee"})),
                 "recorded", "Spending is a negative amount in ledger.add_transaction"),
    TaskTemplate("List all ledger transactions.", ("ledger",),
                 (("ledger.login", {}), ("ledger.list_transactions", {})), "listed",
                 "ledger.list_transactions returns rows oldest first"),
    TaskTemplate("Which messages are in my inbox?", ("mail",),
                 (("mail.login", {}), ("mail.inbox", {})), "inbox listed",
                 "mail.inbox lists ids, senders and subjects after mail.login"),
    TaskTemplate("Read inbox message 1.", ("mail",),
                 (("mail.login", {}), ("mail.read", {"message_id": 1})), "read",
                 "mail.read takes an integer message_id taken from mail.inbox"),
    TaskTemplate("Email bob@example.com that the report is ready.", ("mail",),
                 (("mail.login", {}), ("mail.send", {"to": "bob@example.com", "subject": "report",
                                                     "body": "The report is ready."})),
                 "sent", "mail.send needs to, subject and body; recipients must be full addresses"),
    TaskTemplate("What arguments does mail.send take?", ("docs",),
                 (("docs.show_tool_doc", {"tool": "mail.send"}),), "to, subject, body",
                 "docs.show_tool_doc returns the parameter list of any tool"),
    TaskTemplate("Show note 99 and email it to carol@example.com.", ("notes", "mail"),
                 (("notes.login", {}), ("notes.get_note", {"note_id": 99})), "note missing",
                 "Check that a note exists with notes.list_notes before acting on it"),
)


def call_text(tool: str, arguments: dict[str, Any]) -> str:
    return f"CALL {tool} {json.dumps(arguments, sort_keys=True)}"


def _verdict(feasibility: int, completion: int) -> dict[str, Any]:
    return {
        "feasibility_reason": f"Scripted feasibility judgement at level {feasibility}.",
        "feasibility_score": feasibility,
        "task_completion_reason": f"Scripted completion judgement at level {completion}.",
        "task_completion_score": completion,
    }


class _InductionScript:
    """Emits reflector/curator pairs that each add one uniquely worded bullet."""

    def __init__(self, script: FixtureScript, usage: bool):
        self.script = script
        self.usage = usage
        self.counters = {s: 1 for s in SECTIONS}
        self.added = 0
        self.last_id: str | None = None

    def _usage(self, role: str) -> TokenUsage | None:
        return ROLE_USAGE[role] if self.usage else None

    def add(self, content: str, section: str | None = None) -> str:
        section = section or SECTIONS[self.added % len(SECTIONS)]
        tags = {self.last_id: "helpful"} if self.last_id else {}
        self.script.add(
            "reflector",
            {
                "reasoning": "The trajectory followed the documented call order.",
                "error_identification": "none",
                "root_cause_analysis": "none",
                "correct_approach": content,
                "key_insight": content,
                "bullet_tags": tags,
            },
            self._usage("reflector"),
        )
        self.script.add(
            "curator",
            {"reasoning": "New reusable procedure.", "operations": [
                {"type": "ADD", "section": section, "content": content}
            ]},
            self._usage("curator"),
        )
        bullet_id = f"{section}-{self.counters[section]:05d}"
        self.counters[section] += 1
        self.added += 1
        self.last_id = bullet_id
        return bullet_id


@dataclass
class ConstructionPack:
    script: FixtureScript
    verdicts: list[tuple[str, int, int]]  # (task_id, feasibility, completion)
    boundaries: list[dict[str, int]]  # per-role counters after each iteration

    def admitted(self, threshold: int = 5) -> list[str]:
        return [t for t, f, _ in self.verdicts if f >= threshold]


def construction_pack(
    iterations: int = 10,
    batch_size: int = 10,
    verdicts: Sequence[tuple[int, int]] = DEFAULT_VERDICT_CYCLE,
    usage: bool = True,
    admit_threshold: int = 5,
    infeasible_max: int = 2,
) -> ConstructionPack:
    """Fixtures for a sequential construction run on MiniWorld."""
    script = FixtureScript()
    induction = _InductionScript(script, usage)
    use = (lambda role: ROLE_USAGE[role]) if usage else (lambda role: None)
    plan: list[tuple[str, int, int]] = []
    boundaries = []
    k = 0
    for t in range(1, iterations + 1):
        batch = [TEMPLATES[(k + i * 5 + t) % len(TEMPLATES)] for i in range(batch_size)]
        script.add(
            "proposer",
            [
                {
                    "question": f"{tpl.question} (round {t}, item {i + 1})",
                    "servers": list(tpl.servers),
                    "intended_functions": [tool for tool, _ in tpl.actions],
                }
                for i, tpl in enumerate(batch)
            ],
            use("proposer"),
        )
        for i, tpl in enumerate(batch):
            task_id = f"t{t}-{i + 1}"
            for tool, args in tpl.actions:
                script.add("solver", call_text(tool, args), use("solver"))
            script.add("solver", f"DONE {tpl.answer}", use("solver"))
            feasibility, completion = verdicts[k % len(verdicts)]
            script.add("validator", _verdict(feasibility, completion), use("validator"))
            if feasibility > infeasible_max:
                script.add(
                    "env_summarizer",
                    {"summary": [f"{tpl.servers[0]} requires login before other calls",
                                 f"observed while practising {task_id}"]},
                    use("env_summarizer"),
                )
            if feasibility >= admit_threshold:
                induction.add(f"{tpl.hint} (learned from {task_id}).")
            plan.append((task_id, feasibility, completion))
            k += 1
        boundaries.append(script.snapshot())
    return ConstructionPack(script, plan, boundaries)


# efficacy replay: ledger tools need a login the unprimed solver skips

LOGIN_BULLET = "Always call ledger.login before any other ledger tool."


def efficacy_construction_pack() -> FixtureScript:
    """One iteration, two ledger tasks; the first is admitted and teaches LOGIN_BULLET."""
    script = FixtureScript()
    script.add("proposer", [
        {"question": "Record a 12.50 lunch expense.", "servers": ["ledger"],
         "intended_functions": ["ledger.login", "ledger.add_transaction"]},
        {"question": "Show the ledger balance.", "servers": ["ledger"],
         "intended_functions": ["ledger.show_balance"]},
    ])
    # task 1: first attempt fails on login, then recovers
    script.add("solver", call_text("ledger.add_transaction", {"amount": -12.5, "memo": "lunch"}))
    script.add("solver", call_text("ledger.login", {}))
    script.add("solver", call_text("ledger.add_transaction", {"amount": -12.5, "memo": "lunch"}))
    script.add("solver", "DONE recorded")
    script.add("validator", _verdict(5, 4))
    script.add("env_summarizer", {"summary": ["ledger tools fail until ledger.login is called"]})
    _InductionScript(script, usage=False).add(LOGIN_BULLET, section="strategies")
    # task 2: rejected, so it must not touch the playbook
    script.add("solver", call_text("ledger.show_balance", {}))
    script.add("solver", "DONE unknown")
    script.add("validator", _verdict(4, 1))
    script.add("env_summarizer", {"summary": ["ledger.show_balance needs a session"]})
    return script


def efficacy_eval_tasks(count: int = 5) -> list[OnlineTask]:
    tasks = []
    for i in range(count):
        memo = f"refund-{i + 1}"
        tasks.append(
            OnlineTask(
                task_id=f"eval-{i + 1}",
                instruction=f"Record a {10 + i}.00 refund with memo '{memo}'.",
                seed=100 + i,
                expected_answer="recorded",
                checks=(StateCheck("ledger.list_transactions", {}, memo),),
            )
        )
    return tasks


def efficacy_eval_pack(tasks: Sequence[OnlineTask]) -> FixtureScript:
    """Solver script per eval task; steps branch on whether the playbook holds LOGIN_BULLET.

    Both branches take the same number of steps so per-role indices stay aligned.
    """
    script = FixtureScript()
    for i, task in enumerate(tasks):
        memo = f"refund-{i + 1}"
        add = call_text("ledger.add_transaction", {"amount": float(10 + i), "memo": memo})
        script.add("solver", call_text("ledger.show_balance", {}),
                   branches=[(LOGIN_BULLET, call_text("ledger.login", {}))])
        script.add("solver", add)
        script.add("solver", "DONE recorded")
    return script


def online_pack(count: int, usage: bool = True) -> tuple[FixtureScript, list[OnlineTask]]:
    """A stream of simple MiniWorld tasks; induction fixtures add one bullet per task."""
    script = FixtureScript()
    induction = _InductionScript(script, usage)
    use = (lambda role: ROLE_USAGE[role]) if usage else (lambda role: None)
    tasks = []
    for i in range(count):
        tpl = TEMPLATES[i % (len(TEMPLATES) - 1)]
        for tool, args in tpl.actions:
            script.add("solver", call_text(tool, args), use("solver"))
        script.add("solver", f"DONE {tpl.answer}", use("solver"))
        induction.add(f"{tpl.hint} (online task {i + 1}).")
        tasks.append(OnlineTask(f"online-{i + 1}", tpl.question, seed=i, expected_answer=tpl.answer))
    return script, tasks
