"""Shared scripted scenarios pinned by both unit tests and golden files."""

from __future__ import annotations

from toolloop.agent import SessionConfig
from toolloop.executor import ExecutionEnv, FixtureStore
from toolloop.llm import ScriptedAdapter
from toolloop.retrieval import RetrievalConfig
from toolloop.trace import TickClock

QUESTION = "What interactions should a patient on warfarin avoid?"

SCRIPT_IMMEDIATE_FINAL = [
    "Retrieval intention: warfarin interaction partners.",
    "FINAL ANSWER: Avoid aspirin and NSAIDs while taking warfarin.",
]

CALL_OK = '{"name": "drug_interactions_lookup", "arguments": {"drug_name": "warfarin"}}'
CALL_BAD_PARAM = '{"name": "dailymed_get_spl", "arguments": {"drugname": "warfarin"}}'

SCRIPT_TWO_ITERATION = [
    "Retrieval intention: warfarin interaction partners.",
    f"[{CALL_OK}, {CALL_BAD_PARAM}]",
    "FINAL ANSWER: Avoid aspirin, NSAIDs, and amiodarone dose changes.",
]

SCRIPT_BUDGET = [
    "Retrieval intention: warfarin interaction partners.",
    f"[{CALL_OK}]",
    f"[{CALL_OK}]",
    f"[{CALL_OK}]",
    "FINAL ANSWER: Best guess: avoid aspirin and NSAIDs.",
]


def scenario_env(named_fixture_dir, store_dir=None) -> ExecutionEnv:
    return ExecutionEnv(
        mode="fixtures_only",
        transport=None,
        store=FixtureStore(store_dir) if store_dir else None,
        named_fixture_dir=named_fixture_dir,
        sleep=lambda _s: None,
        clock=lambda: 0.0,
    )


def scenario_config(max_iterations: int = 10) -> SessionConfig:
    return SessionConfig(retrieval=RetrievalConfig(), max_iterations=max_iterations)


def run_scenario(script, registry, named_fixture_dir, *, max_iterations=10,
                 session_id="golden", question_id="g"):
    from toolloop.agent import run_session

    adapter = ScriptedAdapter(script)
    return run_session(
        QUESTION,
        registry,
        adapter,
        scenario_env(named_fixture_dir),
        scenario_config(max_iterations),
        session_id=session_id,
        question_id=question_id,
        clock=TickClock(),
    )
