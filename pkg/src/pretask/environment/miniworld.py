"""MiniWorld: a small deterministic tool environment for desk-scale runs.

Three apps (notes, ledger, mail), each with a ``login`` tool that must be
called before the app's other tools, plus one documentation tool
(``docs.show_tool_doc``). Initial state is drawn from ``random.Random(seed)``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import random
from typing import Any, Callable, Mapping

from .base import EnvironmentHandle, Param, ToolSpec, register_environment

_WORDS = (
    "budget", "garden", "invoice", "meeting", "roadmap", "travel", "recipe", "review",
    "launch", "hiring", "offsite", "backup", "renewal", "survey", "workshop", "audit",
)
_CONTACTS = ("alice@example.com", "bob@example.com", "carol@example.com", "dan@example.com")
OWNER = "sam@example.com"

TOOLS: tuple[ToolSpec, ...] = (
    ToolSpec("docs", "show_tool_doc", "Show the full documentation of one tool.",
             (Param("tool", "string"),)),
    ToolSpec("notes", "login", "Start a notes session. Required before other notes tools."),
    ToolSpec("notes", "create_note", "Create a note and return its id.",
             (Param("title", "string"), Param("body", "string"))),
    ToolSpec("notes", "list_notes", "List note ids and titles."),
    ToolSpec("notes", "get_note", "Show one note.", (Param("note_id", "int"),)),
    ToolSpec("notes", "delete_note", "Delete one note.", (Param("note_id", "int"),)),
    ToolSpec("ledger", "login", "Start a ledger session. Required before other ledger tools."),
    ToolSpec("ledger", "add_transaction",
             "Record a transaction (negative amount for spending) and return the new balance.",
             (Param("amount", "real"), Param("memo", "string"))),
    ToolSpec("ledger", "show_balance", "Show the current balance."),
    ToolSpec("ledger", "list_transactions", "List transactions, oldest first."),
    ToolSpec("mail", "login", "Start a mail session. Required before other mail tools."),
    ToolSpec("mail", "send", "Send an email.",
             (Param("to", "string"), Param("subject", "string"), Param("body", "string"))),
    ToolSpec("mail", "inbox", "List inbox message ids, senders and subjects."),
    ToolSpec("mail", "read", "Read one inbox message.", (Param("message_id", "int"),)),
)
TOOL_INDEX: dict[str, ToolSpec] = {t.qualified_id: t for t in TOOLS}
APPS: tuple[str, ...] = ("notes", "ledger", "mail")
META_TOOLS: tuple[str, ...] = ("docs.*",)

# Every error observation MiniWorld can produce.
ERRORS: Mapping[str, str] = {
    "unknown_tool": "unknown tool {tool}",
    "missing_argument": "missing required argument '{name}' for {tool}",
    "unexpected_argument": "unexpected argument '{name}' for {tool}",
    "bad_type": "argument '{name}' for {tool} must be of type {type}",
    "not_logged_in": "{app}: not logged in; call {app}.login first",
    "note_missing": "note {id} does not exist",
    "message_missing": "message {id} does not exist",
    "empty_value": "argument '{name}' for {tool} must not be empty",
    "bad_recipient": "recipient {to} is not a valid email address",
    "insufficient_funds": "transaction of {amount} would make the balance negative",
}


def _type_ok(value: Any, type_tag: str) -> bool:
    if type_tag == "string":
        return isinstance(value, str)
    if type_tag == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if type_tag == "real":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if type_tag == "bool":
        return isinstance(value, bool)
    if type_tag == "list":
        return isinstance(value, list)
    return False


def _money(value: float) -> str:
    return f"{value:.2f}"


class MiniWorld(EnvironmentHandle):
    name = "MiniWorld"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.state: dict[str, Any] = {}
        self.reset(seed)

    def reset(self, seed: int) -> None:
        rng = random.Random(seed)
        notes = {}
        for note_id in range(1, rng.randint(3, 5) + 1):
            title = f"{rng.choice(_WORDS)} {rng.choice(_WORDS)}"
            notes[note_id] = {"title": title, "body": f"Draft about {title}."}
        transactions = []
        balance = 0.0
        for tx_id in range(1, rng.randint(2, 4) + 1):
            amount = float(rng.randint(-40, 200))
            balance += amount
            transactions.append({"id": tx_id, "amount": amount, "memo": rng.choice(_WORDS)})
        if balance < 0:
            transactions.append({"id": len(transactions) + 1, "amount": -balance + 50.0, "memo": "top-up"})
            balance = 50.0
        inbox = {}
        for msg_id in range(1, rng.randint(2, 4) + 1):
            topic = rng.choice(_WORDS)
            inbox[msg_id] = {
                "from": rng.choice(_CONTACTS),
                "subject": f"{topic} update",
                "body": f"Quick note on the {topic}; please reply by Friday.",
            }
        self.seed = seed
        self.state = {
            "sessions": [],
            "notes": notes,
            "next_note_id": len(notes) + 1,
            "balance": balance,
            "transactions": transactions,
            "inbox": inbox,
            "sent": [],
        }

    def list_documentation(self) -> str:
        lines = []
        for app in ("docs",) + APPS:
            lines.append(f"# {app}")
            lines.extend(t.signature() for t in TOOLS if t.app == app)
        return "\n".join(lines)

    def fingerprint(self) -> str:
        canonical = json.dumps(self.state, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def snapshot(self) -> dict[str, Any]:
        return copy.deepcopy(self.state)

    def invoke(self, tool: str, arguments: Mapping[str, Any]) -> tuple[str, bool]:
        spec = TOOL_INDEX.get(tool)
        if spec is None:
            return ERRORS["unknown_tool"].format(tool=tool), True
        arguments = dict(arguments or {})
        declared = {p.name: p for p in spec.params}
        for name in sorted(arguments):
            if name not in declared:
                return ERRORS["unexpected_argument"].format(name=name, tool=tool), True
        for param in spec.params:
            if param.name not in arguments:
                if param.required:
                    return ERRORS["missing_argument"].format(name=param.name, tool=tool), True
                continue
            if not _type_ok(arguments[param.name], param.type):
                return ERRORS["bad_type"].format(name=param.name, tool=tool, type=param.type), True
        if spec.app in APPS and spec.name != "login" and spec.app not in self.state["sessions"]:
            return ERRORS["not_logged_in"].format(app=spec.app), True
        handler: Callable[..., tuple[str, bool]] = getattr(self, f"_{spec.app}_{spec.name}")
        return handler(**arguments)

    # docs

    def _docs_show_tool_doc(self, tool: str) -> tuple[str, bool]:
        spec = TOOL_INDEX.get(tool)
        if spec is None:
            return ERRORS["unknown_tool"].format(tool=tool), True
        params = [
            {"name": p.name, "type": p.type, "required": p.required} for p in spec.params
        ]
        doc = {"tool": spec.qualified_id, "description": spec.description, "params": params}
        return json.dumps(doc, sort_keys=True), False

    def _login(self, app: str) -> tuple[str, bool]:
        if app not in self.state["sessions"]:
            self.state["sessions"] = sorted(self.state["sessions"] + [app])
        return f"logged in to {app} as {OWNER}", False

    # notes

    def _notes_login(self) -> tuple[str, bool]:
        return self._login("notes")

    def _notes_create_note(self, title: str, body: str) -> tuple[str, bool]:
        if not title.strip():
            return ERRORS["empty_value"].format(name="title", tool="notes.create_note"), True
        note_id = self.state["next_note_id"]
        self.state["notes"][note_id] = {"title": title, "body": body}
        self.state["next_note_id"] = note_id + 1
        return f"created note {note_id}", False

    def _notes_list_notes(self) -> tuple[str, bool]:
        notes = self.state["notes"]
        if not notes:
            return "no notes", False
        return "\n".join(f"{i}: {n['title']}" for i, n in sorted(notes.items())), False

    def _notes_get_note(self, note_id: int) -> tuple[str, bool]:
        note = self.state["notes"].get(note_id)
        if note is None:
            return ERRORS["note_missing"].format(id=note_id), True
        return f"note {note_id}: {note['title']}\n{note['body']}", False

    def _notes_delete_note(self, note_id: int) -> tuple[str, bool]:
        if note_id not in self.state["notes"]:
            return ERRORS["note_missing"].format(id=note_id), True
        del self.state["notes"][note_id]
        return f"deleted note {note_id}", False

    # ledger

    def _ledger_login(self) -> tuple[str, bool]:
        return self._login("ledger")

    def _ledger_add_transaction(self, amount: float, memo: str) -> tuple[str, bool]:
        amount = float(amount)
        if self.state["balance"] + amount < 0:
            return ERRORS["insufficient_funds"].format(amount=_money(amount)), True
        tx_id = len(self.state["transactions"]) + 1
        self.state["transactions"].append({"id": tx_id, "amount": amount, "memo": memo})
        self.state["balance"] += amount
        return f"recorded transaction {tx_id}; balance {_money(self.state['balance'])}", False

    def _ledger_show_balance(self) -> tuple[str, bool]:
        return f"balance {_money(self.state['balance'])}", False

    def _ledger_list_transactions(self) -> tuple[str, bool]:
        rows = [f"{t['id']}: {_money(t['amount'])} {t['memo']}" for t in self.state["transactions"]]
        return "\n".join(rows) or "no transactions", False

    # mail

    def _mail_login(self) -> tuple[str, bool]:
        return self._login("mail")

    def _mail_send(self, to: str, subject: str, body: str) -> tuple[str, bool]:
        if "@" not in to or to.startswith("@") or to.endswith("@"):
            return ERRORS["bad_recipient"].format(to=to), True
        self.state["sent"].append({"to": to, "subject": subject, "body": body})
        return f"sent message {len(self.state['sent'])} to {to}", False

    def _mail_inbox(self) -> tuple[str, bool]:
        inbox = self.state["inbox"]
        if not inbox:
            return "inbox is empty", False
        return "\n".join(f"{i}: {m['from']} | {m['subject']}" for i, m in sorted(inbox.items())), False

    def _mail_read(self, message_id: int) -> tuple[str, bool]:
        msg = self.state["inbox"].get(message_id)
        if msg is None:
            return ERRORS["message_missing"].format(id=message_id), True
        return f"from {msg['from']}\nsubject: {msg['subject']}\n\n{msg['body']}", False


def miniworld_create(seed: int = 0) -> MiniWorld:
    return MiniWorld(seed)


register_environment("miniworld", miniworld_create, META_TOOLS)
