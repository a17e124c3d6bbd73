from __future__ import annotations

import json

import httpx
import pytest
from conftest import make_task

from pretask.errors import (
    BackendError,
    BatchParseError,
    ConfigError,
    CurationParseError,
    FixtureMissError,
    ReflectionParseError,
    SummaryParseError,
    TransportError,
    VerdictParseError,
)
from pretask.gateway import (
    CallableBackend,
    Gateway,
    HttpBackend,
    ModelRequest,
    ModelResponse,
    ScriptedBackend,
    TokenUsage,
    ValidationVerdict,
    build_curator_prompt,
    build_env_summary_prompt,
    build_reflector_prompt,
    build_task_generation_prompt,
    build_validator_prompt,
    extract_json,
    parse_env_summary,
    parse_operations,
    parse_reflection,
    parse_task_batch,
    parse_verdict,
    render_verdict,
)
from pretask.gateway.fixtures import FixtureScript
from pretask.gateway.templates import fill
from pretask.memory import ProposerMemory, render_proposer_context


def resp(text: str) -> ModelResponse:
    return ModelResponse(text)


# templates and builders


def test_fill_is_single_pass_and_keeps_unknown_slots():
    assert fill("{a} {b} {zz}", {"a": "{b}", "b": "x"}) == "{b} x {zz}"


def test_role_temperatures_default():
    assert ModelRequest("solver", "p").temperature == 0.0
    assert ModelRequest("proposer", "p").temperature == 1.0
    for role in ("validator", "env_summarizer", "reflector", "curator"):
        assert ModelRequest(role, "p").temperature == 0.7
    with pytest.raises(ValueError):
        ModelRequest("critic", "p")
    with pytest.raises(ValueError):
        ModelRequest("solver", "p", temperature=3.0)


def test_task_generation_prompt_sections():
    context = render_proposer_context(ProposerMemory.empty())
    req = build_task_generation_prompt("# notes\nnotes.login(): x", context, 7, "MiniWorld")
    assert req.role == "proposer"
    assert "# notes\nnotes.login(): x" in req.prompt
    assert "## Environment Information\nnone\n" in req.prompt
    assert "Recently overused apps: none" in req.prompt
    assert req.prompt.rstrip().endswith("Generate 7 diverse task instructions:")
    assert "MiniWorld" in req.prompt
    assert build_task_generation_prompt("d", "", 1).prompt == build_task_generation_prompt("d", "", 1).prompt
    with pytest.raises(ValueError):
        build_task_generation_prompt("d", "", 0)


def test_validator_and_summary_prompts_embed_task_and_trajectory():
    task = make_task(instruction="Archive note 3.")
    for build in (build_validator_prompt, build_env_summary_prompt):
        req = build(task, "STEP 0\nCALL x {}\nok", "MiniWorld")
        assert "Archive note 3." in req.prompt and "STEP 0\nCALL x {}\nok" in req.prompt
        assert "{" + "trajectory}" not in req.prompt


def test_reflector_prompt_ground_truth_none_literal():
    req = build_reflector_prompt(make_task(), None, "## strategies", "traj", "MiniWorld")
    assert "Ground Truth Result:\nNone" in req.prompt
    v = ValidationVerdict(5, "grounded", 4, "mostly done")
    req = build_reflector_prompt(make_task(), render_verdict(v), "## strategies", "traj")
    assert '"task_completion_score": 4' in req.prompt


def test_curator_prompt_contains_all_inputs():
    req = build_curator_prompt(make_task(instruction="I"), "PLAYBOOK", "TRAJ", "REFL")
    for part in ("PLAYBOOK", "TRAJ", "REFL"):
        assert part in req.prompt
    assert req.role == "curator"


# JSON recovery and parsers


def test_extract_json_handles_fences_prose_and_trailing_commas():
    assert extract_json('```json\n{"a": 1}\n```', dict) == {"a": 1}
    assert extract_json('Sure! [1, 2] and then [1, 2, 3,] done', list) == [1, 2, 3]
    assert extract_json('x {"a": "}"} y', dict) == {"a": "}"}
    assert extract_json("nothing here", dict) is None


def test_parse_task_batch_ids_and_drops():
    text = json.dumps(
        [
            {"question": "Q1", "servers": ["notes"], "intended_functions": ["notes.login"]},
            {"question": "", "servers": ["mail"]},
            {"question": "Q3", "servers": "mail"},
            "junk",
        ]
    )
    warnings = []
    tasks = parse_task_batch(resp(text), 4, warnings.append)
    assert [t.task_id for t in tasks] == ["t4-1", "t4-3"]
    assert tasks[1].servers == ("mail",)
    assert len(warnings) == 2
    with pytest.raises(BatchParseError):
        parse_task_batch(resp("no json"), 1)
    with pytest.raises(BatchParseError):
        parse_task_batch(resp('[{"question": ""}]'), 1)


def test_parse_verdict_coerces_and_clamps():
    warnings = []
    v = parse_verdict(resp('{"feasibility_score": "5", "task_completion_score": 7.0}'), warnings.append)
    assert (v.feasibility_score, v.completion_score) == (5, 5)
    assert warnings and "clamped" in warnings[0]
    v = parse_verdict(resp('{"feasibility_score": 3, "completion_score": 2, "completion_reason": "r"}'))
    assert v.completion_reason == "r"
    with pytest.raises(VerdictParseError):
        parse_verdict(resp('{"feasibility_score": "high", "task_completion_score": 1}'))


def test_render_verdict_roundtrips_through_parser():
    v = ValidationVerdict(4, "a", 2, "b")
    assert parse_verdict(resp(render_verdict(v))) == v


def test_parse_env_summary():
    lines = parse_env_summary(resp('{"summary": "- a\\n- b\\n\\n* c"}'))
    assert lines == ["a", "b", "c"]
    warnings = []
    assert len(parse_env_summary(resp(json.dumps({"summary": list("abcdefg")})), warnings.append)) == 5
    assert warnings
    for bad in ('{"summary": ""}', '{"other": 1}', "nope"):
        with pytest.raises(SummaryParseError):
            parse_env_summary(resp(bad))


def test_parse_reflection_normalizes_tags():
    text = json.dumps({"key_insight": "k", "bullet_tags": {"strategies-00001": "HELPFUL", "x": "great"}})
    warnings = []
    r = parse_reflection(resp(text), warnings.append)
    assert r.bullet_tags == {"strategies-00001": "helpful", "x": "neutral"}
    assert warnings
    with pytest.raises(ReflectionParseError):
        parse_reflection(resp('{"reasoning": "no insight"}'))


def test_parse_operations_whitelist_and_cleanup():
    text = json.dumps(
        {
            "operations": [
                {"type": "ADD", "section": "Strategies", "content": "  log in   first "},
                {"type": "UPDATE", "section": "strategies", "content": "x"},
                {"type": "DELETE", "section": "pitfalls", "content": "x"},
                {"type": "ADD", "section": "tips", "content": "x"},
                {"type": "ADD", "section": "pitfalls", "content": "[pitfalls-00001] helpful=2 harmful=0 :: ids"},
                {"type": "ADD", "section": "pitfalls", "content": "[pitfalls-00002] keep"},
            ]
        }
    )
    warnings = []
    ops = parse_operations(resp(text), warnings.append)
    assert [(o.section, o.content) for o in ops] == [("strategies", "log in first"), ("pitfalls", "ids")]
    assert len(warnings) == 4
    assert parse_operations(resp('{"operations": []}')) == []
    with pytest.raises(CurationParseError):
        parse_operations(resp('{"reasoning": "x"}'))


# backends


def test_scripted_backend_keyed_by_role_and_index(tmp_path):
    script = FixtureScript()
    script.add("solver", "DONE a", usage=TokenUsage(1, 2, 3))
    script.add("solver", "DONE b", branches=[("MAGIC", "DONE magic")])
    script.add("validator", {"feasibility_score": 5})
    path = tmp_path / "f.jsonl"
    script.write(path)
    gw = Gateway(ScriptedBackend.from_jsonl(path))
    assert gw.complete(ModelRequest("solver", "p")).text == "DONE a"
    assert gw.complete(ModelRequest("solver", "has MAGIC")).text == "DONE magic"
    assert json.loads(gw.complete(ModelRequest("validator", "p")).text) == {"feasibility_score": 5}
    with pytest.raises(FixtureMissError) as err:
        gw.complete(ModelRequest("solver", "p"))
    assert "role='solver' index=2" in str(err.value)
    assert gw.ledger[("construction", "solver")] == TokenUsage(1, 2, 3)


def test_fixture_truncation_by_counters(tmp_path):
    script = FixtureScript()
    for i in range(3):
        script.add("solver", f"DONE {i}")
    script.add("proposer", "[]")
    assert len(script.lines({"solver": 2})) == 2


def test_scripted_backend_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="missing.jsonl"):
        ScriptedBackend.from_jsonl(tmp_path / "missing.jsonl")
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"role": "solver"}\n')
    with pytest.raises(ConfigError, match="bad.jsonl:1"):
        ScriptedBackend.from_jsonl(bad)


def test_gateway_retries_transport_errors_with_backoff():
    calls = []
    sleeps = []

    def flaky(request):
        calls.append(request.request_index)
        if len(calls) < 3:
            raise TransportError("boom")
        return "ok"

    gw = Gateway(CallableBackend(flaky), retry_limit=3, backoff_base=0.5, sleep=sleeps.append)
    assert gw.complete(ModelRequest("solver", "p")).text == "ok"
    assert calls == [0, 0, 0]
    assert sleeps == [0.5, 1.0]
    assert gw.counters["solver"] == 1


def test_gateway_exhaustion_raises_backend_error():
    def dead(request):
        raise TransportError("down")

    gw = Gateway(CallableBackend(dead), retry_limit=2, sleep=lambda _: None)
    with pytest.raises(BackendError, match="retries exhausted after 3 attempts"):
        gw.complete(ModelRequest("proposer", "p"))


def test_gateway_does_not_retry_non_transport_errors():
    calls = []

    def bad(request):
        calls.append(1)
        raise BackendError("401")

    gw = Gateway(CallableBackend(bad), sleep=lambda _: None)
    with pytest.raises(BackendError):
        gw.complete(ModelRequest("solver", "p"))
    assert calls == [1]


def test_gateway_ledger_by_phase_and_state_restore():
    gw = Gateway(CallableBackend(lambda r: ModelResponse("x", TokenUsage(1, 1, 1))))
    gw.complete(ModelRequest("solver", "p"))
    gw.phase = "evaluation"
    gw.complete(ModelRequest("solver", "p"))
    gw.complete(ModelRequest("reflector", "p"))
    assert gw.ledger[("construction", "solver")] == TokenUsage(1, 1, 1)
    assert gw.ledger[("evaluation", "solver")] == TokenUsage(1, 1, 1)
    state = json.loads(json.dumps(gw.state()))
    other = Gateway(CallableBackend(lambda r: "x"))
    other.restore(state)
    assert other.counters == gw.counters and other.ledger == gw.ledger
    assert gw.prompts("reflector") == ["p"]


def _http(handler, **kw) -> HttpBackend:
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return HttpBackend("http://llm.test/v1/chat/completions", "m", client=client, **kw)


def test_http_backend_success_and_usage(monkeypatch):
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return httpx.Response(
            200,
            json={
                "choices": [{"message": {"content": "hello"}}],
                "usage": {"prompt_cache_hit_tokens": 10, "prompt_cache_miss_tokens": 5, "completion_tokens": 2},
            },
        )

    monkeypatch.setenv("PRETASK_API_TOKEN", "sekret")
    out = _http(handler).generate(ModelRequest("validator", "hi"))
    assert out.text == "hello"
    assert out.usage == TokenUsage(10, 5, 2)
    assert seen["auth"] == "Bearer sekret"
    assert seen["body"]["temperature"] == 0.7


def test_http_backend_openai_cached_tokens():
    def handler(request):
        return httpx.Response(
            200,
            json={
                "choices": [{"message": {"content": "x"}}],
                "usage": {"prompt_tokens": 100, "completion_tokens": 7, "prompt_tokens_details": {"cached_tokens": 40}},
            },
        )

    assert _http(handler).generate(ModelRequest("solver", "p")).usage == TokenUsage(40, 60, 7)


@pytest.mark.parametrize("status, error", [(429, TransportError), (503, TransportError), (400, BackendError)])
def test_http_backend_status_mapping(status, error):
    backend = _http(lambda request: httpx.Response(status, text="nope"))
    with pytest.raises(error) as err:
        backend.generate(ModelRequest("solver", "p"))
    if error is BackendError:
        assert not isinstance(err.value, TransportError)


def test_http_backend_transport_failure_is_retryable():
    def handler(request):
        raise httpx.ConnectError("refused")

    with pytest.raises(TransportError):
        _http(handler).generate(ModelRequest("solver", "p"))
