import json
import random

import pytest

from toolloop.calls import FunctionCall
from toolloop.errors import AdapterError, ParseFailure
from toolloop.llm import (
    SCAFFOLD_MARKERS,
    ChatMessage,
    CompletionRequest,
    HttpAdapter,
    RecordingAdapter,
    ReplayAdapter,
    ScriptBook,
    ScriptedAdapter,
    build_agent_prompt,
    build_rewrite_prompt,
    build_tq_prompt,
    extract_choice,
    parse_turn,
    render_calls,
)
from toolloop.trace import AgentTrace, FeedbackStep


def test_chat_message_roles():
    with pytest.raises(ValueError):
        ChatMessage("oracle", "x")
    with pytest.raises(ValueError):
        ChatMessage("user", "")
    ChatMessage("assistant", "")  # assistant may be empty


def test_completion_request_needs_messages():
    with pytest.raises(ValueError):
        CompletionRequest(messages=())


# --- adapters ---------------------------------------------------------------------


def test_scripted_adapter_queue_semantics():
    adapter = ScriptedAdapter(["r1", "r2"])
    req = build_rewrite_prompt("q")
    assert adapter.complete(req) == "r1"
    assert adapter.complete(req) == "r2"
    with pytest.raises(AdapterError) as exc:
        adapter.complete(req)
    assert "script exhausted" in str(exc.value)
    assert not exc.value.retryable
    assert adapter.calls_made == 2
    assert len(adapter.requests) == 3


def test_script_book_scopes_scripts_per_session():
    book = ScriptBook({"q1": ["a"], "*": ["fallback"]})
    assert book.adapter_for("q1").complete(build_rewrite_prompt("x")) == "a"
    assert book.adapter_for("q2").complete(build_rewrite_prompt("x")) == "fallback"
    # a fresh adapter per call: scripts never interleave
    a1, a2 = book.adapter_for("q1"), book.adapter_for("q1")
    assert a1.complete(build_rewrite_prompt("x")) == "a"
    assert a2.complete(build_rewrite_prompt("x")) == "a"


def test_http_adapter_round_trip_and_errors():
    def ok_post(url, payload, headers):
        assert url.endswith("/completions")
        assert payload["model"] == "m1"
        return {"text": "hello"}

    adapter = HttpAdapter("http://llm.example/v1/", "m1", post=ok_post)
    assert adapter.complete(build_rewrite_prompt("q")) == "hello"

    def bad_post(url, payload, headers):
        raise ConnectionError("refused")

    with pytest.raises(AdapterError) as exc:
        HttpAdapter("http://llm.example", "m1", post=bad_post).complete(
            build_rewrite_prompt("q"))
    assert exc.value.retryable


def test_record_then_replay_fixture(tmp_path):
    recorded = RecordingAdapter(ScriptedAdapter(["stored answer"]), tmp_path)
    request = build_rewrite_prompt("What are the warnings?")
    assert recorded.complete(request) == "stored answer"
    replay = ReplayAdapter(tmp_path)
    assert replay.complete(request) == "stored answer"
    with pytest.raises(AdapterError):
        replay.complete(build_rewrite_prompt("different"))


# --- prompt builders -----------------------------------------------------------------


def test_rewrite_prompt_contains_question_and_is_stable():
    q = "What are the side effects of warfarin during pregnancy?"
    a = build_rewrite_prompt(q)
    b = build_rewrite_prompt(q)
    assert q in a.text()
    assert a == b  # byte-identical template for identical input


def test_rewrite_prompt_rejects_empty():
    with pytest.raises(ValueError):
        build_rewrite_prompt("   ")


def test_agent_prompt_lists_each_candidate_once(fixture_registry):
    candidates = fixture_registry.specs()[:10]
    trace = AgentTrace(session_id="s", question_id="q")
    prompt = build_agent_prompt("Question?", trace, candidates).text()
    for spec in candidates:
        assert prompt.count(f"- {spec.name}:") == 1


def test_agent_prompt_outcomes_precede_candidates(fixture_registry):
    trace = AgentTrace(session_id="s", question_id="q")
    trace.add(FeedbackStep(text="[1] tool(...) fingerprint=abc -> ok: payload"), 0.0)
    prompt = build_agent_prompt("Q?", trace, fixture_registry.specs()[:3]).text()
    assert prompt.index("## Tool results so far") < prompt.index("## Available tools")
    assert "fingerprint=abc" in prompt


def test_agent_prompt_includes_validation_error_verbatim(fixture_registry):
    detail = 'unknown parameter "drugname" for tool "dailymed_get_spl"; missing required parameter "drug_name"'
    trace = AgentTrace(session_id="s", question_id="q")
    trace.add(FeedbackStep(text=f"[1] dailymed_get_spl -> validation_error: {detail}"), 0.0)
    prompt = build_agent_prompt("Q?", trace, fixture_registry.specs()[:2]).text()
    assert detail in prompt


def test_tq_prompt_context_precedes_query():
    req = build_tq_prompt("CONTEXT BLOCK", "THE QUERY")
    text = req.text()
    assert text.index("CONTEXT BLOCK") < text.index("THE QUERY")


def test_tq_prompt_without_context_is_query_only():
    text = build_tq_prompt("", "THE QUERY").text()
    assert "Context:" not in text
    assert "THE QUERY" in text


def test_tq_prompt_renders_four_labeled_options():
    options = ["first", "second", "third", "fourth"]
    text = build_tq_prompt("ctx", "Q?", options).text()
    for label, opt in zip("ABCD", options):
        assert f"{label}. {opt}" in text
    with pytest.raises(ValueError):
        build_tq_prompt("ctx", "Q?", ["only", "three", "options"])


def test_tq_prompt_has_no_agentic_scaffolding(fixture_registry):
    trace = AgentTrace(session_id="s", question_id="q")
    agent_text = build_agent_prompt("Q?", trace, fixture_registry.specs()[:3]).text()
    for marker in SCAFFOLD_MARKERS:
        assert marker in agent_text or marker == "## Tool results so far"
    tq_text = build_tq_prompt("some context", "Q?", ["a", "b", "c", "d"]).text()
    for marker in SCAFFOLD_MARKERS:
        assert marker not in tq_text


# --- parsing ---------------------------------------------------------------------------


def test_parse_calls_array():
    turn = parse_turn('[{"name":"dailymed_get_spl","arguments":{"drug_name":"warfarin"}}]')
    assert turn.kind == "calls"
    assert turn.calls == (FunctionCall("dailymed_get_spl", {"drug_name": "warfarin"}),)


def test_parse_single_object_and_fenced_block():
    turn = parse_turn('{"name":"t","arguments":{}}')
    assert turn.kind == "calls" and len(turn.calls) == 1
    fenced = 'Sure, calling:\n```json\n[{"name":"t","arguments":{"a":1}}]\n```\ndone'
    turn = parse_turn(fenced)
    assert turn.kind == "calls"
    assert turn.calls[0].arguments == {"a": 1}


def test_parse_final_sentinel_with_trailing_text():
    turn = parse_turn("Reasoning...\nFINAL ANSWER: warfarin interacts with aspirin\nbecause bleeding")
    assert turn.kind == "final"
    assert turn.text == "warfarin interacts with aspirin\nbecause bleeding"


def test_parse_truncated_json_is_unterminated():
    with pytest.raises(ParseFailure) as exc:
        parse_turn('[{"name":')
    assert "unterminated" in str(exc.value)


def test_parse_prose_is_failure_not_crash():
    with pytest.raises(ParseFailure):
        parse_turn("I think more information is needed.")


def test_parse_non_call_json_falls_through_to_sentinel():
    turn = parse_turn('The stats {"total": 3} say enough.\nFINAL ANSWER: done')
    assert turn.kind == "final"


def test_parse_choice_in_mc_mode():
    assert parse_turn("ANSWER: C", mc=True).text == "C"
    with pytest.raises(ParseFailure):
        parse_turn("ANSWER: C", mc=False)


def test_calls_render_parse_round_trip():
    rng = random.Random(13)
    for _ in range(50):
        calls = tuple(
            FunctionCall(
                name=f"tool_{rng.randint(0, 9)}",
                arguments={
                    f"p{j}": rng.choice(["x", 3, 2.5, True, "multi word"])
                    for j in range(rng.randint(0, 3))
                },
            )
            for _ in range(rng.randint(1, 4))
        )
        turn = parse_turn(render_calls(calls))
        assert turn.kind == "calls"
        assert turn.calls == calls


def test_extract_choice_sentinel_and_fallback():
    options = ["w", "x", "y", "z"]
    assert extract_choice("ANSWER: C", options) == "C"
    assert extract_choice("answer: b\nmore text", options) == "B"
    assert extract_choice("The best option is (B) because it is safest.", options) == "B"
    assert extract_choice("Could be A or could be D.", options) is None
    assert extract_choice("no letters at all", options) is None
    with pytest.raises(ValueError):
        extract_choice("ANSWER: A", ["too", "few"])
