from __future__ import annotations

import json

import pytest
from conftest import make_task
from hypothesis import given, settings
from hypothesis import strategies as st

from pretask.environment import (
    MiniWorld,
    Trajectory,
    TrajectoryStep,
    extract_tool_calls,
    get_environment,
    parse_action,
    render_trajectory,
    run_solver,
)
from pretask.environment.miniworld import ERRORS, TOOLS
from pretask.environment.solver import INVALID_ACTION_OBSERVATION
from pretask.gateway import CallableBackend, Gateway
from pretask.memory import SolverMemory, add_bullet


def scripted_gateway(*texts: str) -> Gateway:
    queue = list(texts)
    return Gateway(CallableBackend(lambda r: queue.pop(0)))


def test_registry_and_documentation():
    reg = get_environment("miniworld")
    assert reg.meta_tools == ("docs.*",)
    env = reg.factory(3)
    docs = env.list_documentation()
    assert len(TOOLS) == 14
    assert "notes.get_note(note_id: int): Show one note." in docs
    assert docs.splitlines()[0] == "# docs"
    with pytest.raises(KeyError, match="registered"):
        get_environment("nowhere")


def test_reset_is_deterministic_per_seed():
    a, b, c = MiniWorld(7), MiniWorld(7), MiniWorld(8)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != c.fingerprint()
    a.invoke("notes.login", {})
    assert a.fingerprint() != b.fingerprint()
    a.reset(7)
    assert a.fingerprint() == b.fingerprint()


def test_login_gating_and_error_wording():
    env = MiniWorld(0)
    obs, err = env.invoke("ledger.show_balance", {})
    assert err and obs == ERRORS["not_logged_in"].format(app="ledger")
    assert env.invoke("ledger.login", {})[1] is False
    obs, err = env.invoke("ledger.show_balance", {})
    assert not err and obs.startswith("balance ")


def test_argument_validation():
    env = MiniWorld(0)
    env.invoke("notes.login", {})
    assert env.invoke("notes.get_note", {}) == ("missing required argument 'note_id' for notes.get_note", True)
    assert env.invoke("notes.get_note", {"note_id": "1"})[0] == "argument 'note_id' for notes.get_note must be of type int"
    assert env.invoke("notes.get_note", {"note_id": 1, "x": 2})[0] == "unexpected argument 'x' for notes.get_note"
    assert env.invoke("notes.get_note", {"note_id": 99}) == ("note 99 does not exist", True)
    assert env.invoke("foo.bar", {}) == ("unknown tool foo.bar", True)


def test_notes_ledger_mail_behaviour():
    env = MiniWorld(1)
    for app in ("notes", "ledger", "mail"):
        env.invoke(f"{app}.login", {})
    obs, _ = env.invoke("notes.create_note", {"title": "t", "body": "b"})
    note_id = int(obs.split()[-1])
    assert env.invoke("notes.get_note", {"note_id": note_id})[0] == f"note {note_id}: t\nb"
    assert env.invoke("notes.delete_note", {"note_id": note_id}) == (f"deleted note {note_id}", False)
    balance = env.state["balance"]
    obs, err = env.invoke("ledger.add_transaction", {"amount": -(balance + 1), "memo": "x"})
    assert err and "negative" in obs
    assert env.invoke("mail.send", {"to": "nobody", "subject": "s", "body": "b"})[1] is True
    assert env.invoke("mail.send", {"to": "a@b.c", "subject": "s", "body": "b"}) == ("sent message 1 to a@b.c", False)
    doc = json.loads(env.invoke("docs.show_tool_doc", {"tool": "mail.send"})[0])
    assert [p["name"] for p in doc["params"]] == ["to", "subject", "body"]


def test_parse_action_grammar():
    a = parse_action('CALL notes.get_note {"note_id": 2}')
    assert (a.kind, a.tool, a.arguments) == ("call", "notes.get_note", {"note_id": 2})
    assert parse_action("Thinking...\nCALL notes.login").arguments == {}
    assert parse_action("```\nDONE the answer\n```").answer == "the answer"
    assert parse_action("CALL notes.login [1]").kind == "invalid"
    assert parse_action("CALL {}").kind == "invalid"
    assert parse_action("CALLS x").kind == "invalid"
    assert parse_action("just chatting").kind == "invalid"


def test_run_solver_records_steps_and_terminal_states():
    env = MiniWorld(0)
    gw = scripted_gateway("CALL notes.login {}", "gibberish", 'CALL notes.get_note {"note_id": 1}', "DONE ok")
    traj = run_solver(make_task(), SolverMemory.empty(), env, gw, step_limit=10)
    assert traj.terminal == "completed" and traj.final_answer == "ok"
    kinds = [(s.action_kind, s.is_error) for s in traj.steps]
    assert kinds == [("tool_call", False), ("message", True), ("tool_call", False), ("message", False)]
    assert traj.steps[1].observation.startswith(INVALID_ACTION_OBSERVATION)
    assert extract_tool_calls(traj) == ["notes.login", "notes.get_note"]


def test_run_solver_step_limit_and_playbook_in_prompt():
    _, memory = add_bullet(SolverMemory.empty(), "strategies", "UNIQUE-HINT")
    prompts = []

    def backend(request):
        prompts.append(request.prompt)
        return "CALL notes.list_notes {}"

    traj = run_solver(make_task(), memory, MiniWorld(0), Gateway(CallableBackend(backend)), step_limit=3)
    assert traj.terminal == "step_limit" and len(traj.steps) == 3
    assert all("[strategies-00001] helpful=0 harmful=0 :: UNIQUE-HINT" in p for p in prompts)
    assert "STEP 0\nCALL notes.list_notes {}" in prompts[1]


def test_run_solver_aborts_on_environment_exception():
    class Broken(MiniWorld):
        def invoke(self, tool, arguments):
            raise RuntimeError("kaput")

    traj = run_solver(make_task(), SolverMemory.empty(), Broken(0), scripted_gateway("CALL notes.login {}"))
    assert traj.terminal == "aborted"
    assert traj.steps[-1].is_error and "kaput" in traj.steps[-1].observation


def test_extract_tool_calls_free_text_and_dedup():
    steps = (
        TrajectoryStep(0, "message", "x = apis.mail.send(to=1); apis.mail.send(to=2)", ""),
        TrajectoryStep(1, "tool_call", "CALL notes.login {} # apis.notes.login()", "", tool="notes.login", arguments={}),
    )
    assert extract_tool_calls(Trajectory("t", steps)) == ["mail.send", "notes.login"]


def test_trajectory_roundtrip_and_validation():
    traj = Trajectory("t", (TrajectoryStep(0, "tool_call", "r", "o", False, "a.b", {"x": 1}),), "step_limit")
    assert Trajectory.from_dict(json.loads(json.dumps(traj.to_dict()))) == traj
    with pytest.raises(ValueError):
        Trajectory("t", (TrajectoryStep(1, "message", "r", "o"),))
    with pytest.raises(ValueError):
        TrajectoryStep(0, "message", "r", "o", tool="a.b")


def _traj(n: int, width: int) -> Trajectory:
    return Trajectory("t", tuple(TrajectoryStep(i, "message", "x" * width, f"obs {i}") for i in range(n)))


def test_render_trajectory_format_and_truncation():
    assert render_trajectory(_traj(2, 1)) == "STEP 0\nx\nobs 0\n\nSTEP 1\nx\nobs 1"
    text = render_trajectory(_traj(50, 100), cap=600)
    assert len(text) <= 600
    assert text.startswith("[... ")
    assert text.endswith("STEP 49\n" + "x" * 100 + "\nobs 49")


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 30), st.integers(0, 200), st.integers(20, 3000))
def test_render_trajectory_respects_cap_and_keeps_tail(n, width, cap):
    text = render_trajectory(_traj(n, width), cap)
    assert len(text) <= cap
    if n:
        full_last = f"STEP {n - 1}\n" + "x" * width + f"\nobs {n - 1}"
        assert full_last.endswith(text[-min(len(text), len(full_last)):])
