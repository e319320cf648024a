"""The iterative tool-use state machine.

Agentic sessions rewrite the question once, then cycle retrieve -> model
turn -> validate/execute -> feed back until the model produces a final
answer or the iteration budget runs out.  Fixed-retrieval and no-retrieval
sessions are single bare-prompt completions used by the evaluation
harness.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Sequence

from .calls import FunctionCall, ToolOutcome, call_fingerprint
from .errors import AdapterError, CallValidationError, ConfigError, ParseFailure, SessionAbort
from .executor import ExecutionEnv, execute
from .llm import (
    build_agent_prompt,
    build_final_push_prompt,
    build_rewrite_prompt,
    build_tq_prompt,
    parse_turn,
    render_outcome_line,
)
from .registry import Registry, validate_call
from .retrieval import BackendState, RetrievalConfig, build_backend, retrieve_top_k
from .trace import (
    AgentTrace,
    CallRoundStep,
    FeedbackStep,
    RetrievalStep,
    RewriteStep,
    TerminationStep,
    TickClock,
)

MODES = ("agentic", "fixed_retrieval", "no_retrieval")
REPEAT_POLICIES = ("cached", "reject", "off")


@dataclass(frozen=True)
class SessionConfig:
    """Per-session knobs; validated on construction via check()."""

    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    max_iterations: int = 10
    max_calls_per_round: int = 5
    mode: str = "agentic"
    frozen_context: str | None = None
    repeated_call_policy: str = "cached"

    def check(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.max_calls_per_round < 1:
            raise ConfigError("max_calls_per_round must be >= 1")
        if self.repeated_call_policy not in REPEAT_POLICIES:
            raise ConfigError(f"unknown repeated_call_policy {self.repeated_call_policy!r}")
        if self.mode == "fixed_retrieval" and self.frozen_context is None:
            raise ConfigError("fixed_retrieval mode requires a stored context")

    def echo(self) -> dict:
        return {
            "mode": self.mode,
            "max_iterations": self.max_iterations,
            "max_calls_per_round": self.max_calls_per_round,
            "repeated_call_policy": self.repeated_call_policy,
            "retrieval": {
                "backend": self.retrieval.backend,
                "k": self.retrieval.k,
                "bm25_k1": self.retrieval.bm25_k1,
                "bm25_b": self.retrieval.bm25_b,
            },
        }


@dataclass
class _SessionState:
    """Per-session execution memory: fingerprint -> successful payload."""

    payload_by_fingerprint: dict[str, str] = field(default_factory=dict)


def handle_call_round(
    calls: Sequence[FunctionCall],
    registry: Registry,
    env: ExecutionEnv,
    state: _SessionState,
    policy: str = "cached",
) -> tuple[list[tuple[FunctionCall, ToolOutcome]], str]:
    """Validate and execute calls in listed order; failures become outcomes.

    Repeated fingerprints are handled per policy: cached serves the prior
    successful payload without touching the executor, reject refuses the
    repeat, off re-executes.  The returned feedback text references every
    outcome, labeled by call, including the full validation error text.
    """
    items: list[tuple[FunctionCall, ToolOutcome]] = []
    lines: list[str] = []
    for i, call in enumerate(calls, start=1):
        fingerprint = call_fingerprint(call.name, call.arguments)
        try:
            validated = validate_call(registry, call)
        except CallValidationError as e:
            outcome = ToolOutcome(status="validation_error", fingerprint=fingerprint,
                                  detail=str(e))
        else:
            fingerprint = validated.fingerprint
            previous = state.payload_by_fingerprint.get(fingerprint)
            if previous is not None and policy == "cached":
                outcome = ToolOutcome(status="cached", fingerprint=fingerprint,
                                      payload=previous,
                                      detail="identical call served from session cache")
            elif previous is not None and policy == "reject":
                outcome = ToolOutcome(status="execution_error", fingerprint=fingerprint,
                                      detail="repeated identical call rejected")
            else:
                outcome = execute(env, validated)
                if outcome.status == "ok":
                    state.payload_by_fingerprint[fingerprint] = outcome.payload
        items.append((call, outcome))
        lines.append(render_outcome_line(i, call, outcome))
    return items, "\n".join(lines)


def run_session(
    question: str,
    registry: Registry,
    adapter,
    env: ExecutionEnv,
    config: SessionConfig,
    *,
    session_id: str = "session-0",
    question_id: str = "q-0",
    clock=None,
    backend_state: BackendState | None = None,
) -> tuple[AgentTrace, str]:
    """Run one session and return its trace plus the final answer text.

    Adapter errors abort the session with the partial trace preserved on
    the raised SessionAbort.
    """
    config.check()
    clock = clock or TickClock()
    trace = AgentTrace(
        session_id=session_id,
        question_id=question_id,
        mode=config.mode,
        frozen_context=config.frozen_context if config.mode != "agentic" else None,
        config=config.echo(),
    )

    def complete(request) -> str:
        try:
            return adapter.complete(request)
        except AdapterError as e:
            raise SessionAbort(e, trace) from e

    if config.mode in ("fixed_retrieval", "no_retrieval"):
        context = config.frozen_context or "" if config.mode == "fixed_retrieval" else ""
        raw = complete(build_tq_prompt(context, question))
        answer = raw.strip()
        trace.add(TerminationStep(reason="final", answer=answer), clock.now())
        return trace, answer

    # agentic
    if len(registry) == 0:
        raise ConfigError("agentic mode requires a non-empty registry")
    state = _SessionState()
    backend = backend_state or build_backend(registry, config.retrieval)

    rewrite = complete(build_rewrite_prompt(question)).strip()
    trace.add(RewriteStep(text=rewrite), clock.now())

    last_feedback = ""
    answer = ""
    for _ in range(config.max_iterations):
        query = rewrite if not last_feedback else f"{rewrite}\n{last_feedback}"
        ranked = retrieve_top_k(backend, query, config.retrieval)
        trace.add(RetrievalStep(ranked=ranked), clock.now())

        candidates = [registry.get(name) for name in ranked.names() if name in registry]
        raw = complete(build_agent_prompt(question, trace, candidates))
        try:
            turn = parse_turn(raw)
        except ParseFailure as e:
            feedback = (f"Your last response could not be parsed ({e.reason}). "
                        "Reply with a JSON list of function calls or a final answer.")
            trace.add(FeedbackStep(text=feedback), clock.now())
            last_feedback = feedback
            continue

        if turn.kind == "final":
            answer = turn.text
            trace.add(TerminationStep(reason="final", answer=answer), clock.now())
            return trace, answer

        calls = list(turn.calls)
        if not calls:
            feedback = ("Your last response contained an empty call list. "
                        "Reply with calls or a final answer.")
            trace.add(FeedbackStep(text=feedback), clock.now())
            last_feedback = feedback
            continue
        dropped = len(calls) - config.max_calls_per_round
        calls = calls[: config.max_calls_per_round]
        items, feedback = handle_call_round(
            calls, registry, env, state, config.repeated_call_policy)
        if dropped > 0:
            feedback += f"\n({dropped} calls over the per-round limit were ignored)"
        trace.add(CallRoundStep(items=tuple(items)), clock.now())
        trace.add(FeedbackStep(text=feedback), clock.now())
        last_feedback = feedback

    # Budget exhausted: one forced final-answer attempt, then terminate.
    try:
        raw = adapter.complete(build_final_push_prompt(question, trace))
        try:
            turn = parse_turn(raw)
            answer = turn.text if turn.kind == "final" else raw.strip()
        except ParseFailure:
            answer = raw.strip()
    except AdapterError:
        answer = ""
    trace.add(TerminationStep(reason="budget_exhausted", answer=answer), clock.now())
    return trace, answer


def fresh_session_ids(prefix: str = "session"):
    """Deterministic session id stream: prefix-0, prefix-1, ..."""
    return (f"{prefix}-{i}" for i in itertools.count())


def with_mode(config: SessionConfig, mode: str, frozen_context: str | None = None) -> SessionConfig:
    return replace(config, mode=mode, frozen_context=frozen_context)
