"""Session traces: ordered step records, JSONL persistence, context freezing.

Trace files are append-only JSONL, one record per step, and replayable:
the eval harness and freeze_context work from files as well as live
objects.  With the tick clock, records are byte-reproducible.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .calls import FunctionCall, ToolOutcome, canonical_json
from .retrieval import RankedTools


class SystemClock:
    """Wall-clock seconds; used for real runs."""

    def now(self) -> float:
        return time.time()


class TickClock:
    """Deterministic clock: 0, 1, 2, ... per call. Used by scripted runs."""

    def __init__(self):
        self._tick = -1

    def now(self) -> float:
        self._tick += 1
        return float(self._tick)


@dataclass
class RewriteStep:
    kind = "rewrite"
    text: str

    def payload(self) -> dict[str, Any]:
        return {"text": self.text}


@dataclass
class RetrievalStep:
    kind = "retrieval"
    ranked: RankedTools

    def payload(self) -> dict[str, Any]:
        return {
            "query": self.ranked.query,
            "backend": self.ranked.backend,
            "k": self.ranked.k,
            "entries": [[name, score] for name, score in self.ranked.entries],
        }


@dataclass
class CallRoundStep:
    kind = "call_round"
    items: tuple[tuple[FunctionCall, ToolOutcome], ...]

    def payload(self) -> dict[str, Any]:
        return {
            "calls": [
                {"name": c.name, "arguments": dict(c.arguments), "outcome": o.to_dict()}
                for c, o in self.items
            ]
        }


@dataclass
class FeedbackStep:
    kind = "feedback"
    text: str

    def payload(self) -> dict[str, Any]:
        return {"text": self.text}


@dataclass
class TerminationStep:
    kind = "termination"
    reason: str  # final | budget_exhausted
    answer: str

    def payload(self) -> dict[str, Any]:
        return {"reason": self.reason, "answer": self.answer}


Step = RewriteStep | RetrievalStep | CallRoundStep | FeedbackStep | TerminationStep


@dataclass
class AgentTrace:
    """Full ordered record of one session."""

    session_id: str
    question_id: str
    mode: str = "agentic"
    frozen_context: str | None = None
    config: dict[str, Any] = field(default_factory=dict)
    steps: list[Step] = field(default_factory=list)
    timestamps: list[float] = field(default_factory=list)

    def add(self, step: Step, timestamp: float) -> None:
        self.steps.append(step)
        self.timestamps.append(timestamp)

    @property
    def terminated(self) -> bool:
        return bool(self.steps) and self.steps[-1].kind == "termination"

    @property
    def termination(self) -> TerminationStep | None:
        if self.terminated:
            return self.steps[-1]  # type: ignore[return-value]
        return None

    def steps_of(self, kind: str) -> list[Step]:
        return [s for s in self.steps if s.kind == kind]

    def check(self) -> list[str]:
        """Invariant violations for a completed trace; empty means valid."""
        problems = []
        terminations = [i for i, s in enumerate(self.steps) if s.kind == "termination"]
        if len(terminations) != 1 or terminations[0] != len(self.steps) - 1:
            problems.append("trace must end with exactly one termination step")
        if self.mode == "agentic":
            last_retrieval = None
            for i, s in enumerate(self.steps):
                if s.kind == "retrieval":
                    last_retrieval = i
                elif s.kind == "call_round":
                    if last_retrieval is None:
                        problems.append(f"call round at step {i} has no preceding retrieval")
                    last_retrieval = None
        else:
            if self.steps_of("retrieval") or self.steps_of("call_round"):
                problems.append(f"{self.mode} trace must not retrieve or call tools")
        return problems


def to_records(trace: AgentTrace) -> list[dict[str, Any]]:
    """One header record plus one record per step."""
    records = [{
        "session_id": trace.session_id,
        "question_id": trace.question_id,
        "step_index": 0,
        "kind": "session",
        "payload": {
            "mode": trace.mode,
            "frozen_context": trace.frozen_context,
            "config": trace.config,
        },
        "timestamp": trace.timestamps[0] if trace.timestamps else 0.0,
    }]
    for i, (step, ts) in enumerate(zip(trace.steps, trace.timestamps), start=1):
        records.append({
            "session_id": trace.session_id,
            "question_id": trace.question_id,
            "step_index": i,
            "kind": step.kind,
            "payload": step.payload(),
            "timestamp": ts,
        })
    return records


def write_jsonl(trace: AgentTrace, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in to_records(trace):
            fh.write(canonical_json(record) + "\n")


def _step_from_record(record: dict[str, Any]) -> Step:
    kind = record["kind"]
    p = record["payload"]
    if kind == "rewrite":
        return RewriteStep(text=p["text"])
    if kind == "retrieval":
        ranked = RankedTools(
            query=p["query"],
            entries=tuple((name, float(score)) for name, score in p["entries"]),
            backend=p["backend"],
            k=int(p["k"]),
        )
        return RetrievalStep(ranked=ranked)
    if kind == "call_round":
        items = tuple(
            (FunctionCall(name=c["name"], arguments=c["arguments"]),
             ToolOutcome.from_dict(c["outcome"]))
            for c in p["calls"]
        )
        return CallRoundStep(items=items)
    if kind == "feedback":
        return FeedbackStep(text=p["text"])
    if kind == "termination":
        return TerminationStep(reason=p["reason"], answer=p["answer"])
    raise ValueError(f"unknown step kind {kind!r}")


def read_jsonl(path: str | Path) -> AgentTrace:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    if not records or records[0]["kind"] != "session":
        raise ValueError(f"trace file {path} has no session header")
    header = records[0]
    trace = AgentTrace(
        session_id=header["session_id"],
        question_id=header["question_id"],
        mode=header["payload"]["mode"],
        frozen_context=header["payload"].get("frozen_context"),
        config=header["payload"].get("config", {}),
    )
    for record in records[1:]:
        trace.add(_step_from_record(record), record["timestamp"])
    return trace


def freeze_context(trace: AgentTrace) -> str:
    """Extract the reusable retrieved context from a finished session.

    Successful payloads concatenate in execution order, each prefixed by
    its tool name; failed calls are omitted.  Freezing a fixed-retrieval
    session reproduces the context it was given (such traces carry no new
    calls).
    """
    if trace.mode != "agentic":
        return trace.frozen_context or ""
    parts = []
    for step in trace.steps:
        if step.kind != "call_round":
            continue
        for call, outcome in step.items:
            if outcome.succeeded:
                parts.append(f"{call.name}: {outcome.payload}")
    return "\n\n".join(parts)


def summarize(trace: AgentTrace) -> str:
    """Human-oriented one-line-per-step view for trace inspection."""
    lines = [f"session {trace.session_id} question {trace.question_id} mode {trace.mode}"]
    for i, step in enumerate(trace.steps, start=1):
        if step.kind == "rewrite":
            lines.append(f"{i:3d} rewrite     {step.text[:80]}")
        elif step.kind == "retrieval":
            names = ", ".join(step.ranked.names()[:5])
            lines.append(f"{i:3d} retrieval   [{step.ranked.backend}] top: {names}")
        elif step.kind == "call_round":
            statuses = ", ".join(f"{c.name}={o.status}" for c, o in step.items)
            lines.append(f"{i:3d} call_round  {statuses}")
        elif step.kind == "feedback":
            lines.append(f"{i:3d} feedback    {step.text.splitlines()[0][:80]}")
        elif step.kind == "termination":
            lines.append(f"{i:3d} termination {step.reason}: {step.answer[:80]}")
    return "\n".join(lines)
