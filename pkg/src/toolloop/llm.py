"""Language-model gateway: adapters, prompt builders, and turn parsing.

Three prompt styles exist.  The rewrite prompt turns a question into a
retrieval intention.  The agent prompt carries prior tool outcomes, the
candidate tools, and the call/terminate instructions.  The tool-query (TQ)
prompt is deliberately bare: retrieved context first, then the query, with
none of the agentic scaffolding.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .calls import FunctionCall, canonical_json
from .errors import AdapterError, ParseFailure
from .registry import ToolSpec

FINAL_SENTINEL = "FINAL ANSWER:"
ANSWER_RE = re.compile(r"^\s*ANSWER:\s*([A-D])\b", re.IGNORECASE | re.MULTILINE)
OPTION_LABELS = ("A", "B", "C", "D")

# Markers that exist only in agentic prompts; the TQ prompt must never
# contain any of them.
SCAFFOLD_MARKERS = (
    "## Available tools",
    "## Tool results so far",
    FINAL_SENTINEL,
    "JSON list of function calls",
)


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant | tool
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant", "tool"):
            raise ValueError(f"invalid role {self.role!r}")
        if self.role in ("system", "user") and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")


@dataclass(frozen=True)
class CompletionRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self):
        if not self.messages:
            raise ValueError("request needs at least one message")

    def text(self) -> str:
        return "\n\n".join(m.content for m in self.messages)

    def to_dict(self) -> dict[str, Any]:
        return {
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


def request_hash(request: CompletionRequest) -> str:
    return hashlib.sha256(canonical_json(request.to_dict()).encode("utf-8")).hexdigest()[:16]


@dataclass
class ModelTurn:
    """Parsed model output: calls, a final answer, a choice, or a rewrite."""

    kind: str  # rewrite | calls | final | choice
    raw: str
    text: str = ""
    calls: tuple[FunctionCall, ...] = ()


# --- adapters -----------------------------------------------------------------

class ScriptedAdapter:
    """Replays a fixed response queue; deterministic and session-scoped.

    Every request is recorded so tests can assert on the prompts the engine
    actually sent.
    """

    id = "scripted"

    def __init__(self, responses: Sequence[str]):
        self._responses = list(responses)
        self._cursor = 0
        self.requests: list[CompletionRequest] = []

    @property
    def calls_made(self) -> int:
        return self._cursor

    def complete(self, request: CompletionRequest) -> str:
        self.requests.append(request)
        if self._cursor >= len(self._responses):
            raise AdapterError("script exhausted", retryable=False)
        response = self._responses[self._cursor]
        self._cursor += 1
        return response


class ScriptBook:
    """Per-question scripts for benchmark runs.

    The document is either a flat list (every session replays it) or a map
    of question id -> responses with "*" as fallback.  Each session gets a
    fresh adapter, so scripts never interleave.
    """

    def __init__(self, doc: Any):
        if isinstance(doc, list):
            self._default = [str(x) for x in doc]
            self._by_id: dict[str, list[str]] = {}
        elif isinstance(doc, dict):
            self._by_id = {k: [str(x) for x in v] for k, v in doc.items() if k != "*"}
            self._default = [str(x) for x in doc.get("*", [])]
        else:
            raise ValueError("script document must be a list or an object")

    @classmethod
    def load(cls, path: str | Path) -> "ScriptBook":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    def adapter_for(self, question_id: str) -> ScriptedAdapter:
        return ScriptedAdapter(self._by_id.get(question_id, self._default))


class HttpAdapter:
    """Chat-completions style endpoint: {model, messages, ...} -> {text}."""

    def __init__(self, base_url: str, model: str, api_key_env: str = "",
                 post=None, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.id = f"http:{model}"
        if post is None:
            import requests

            def post(url: str, payload: dict, headers: dict) -> dict:
                resp = requests.post(url, json=payload, headers=headers, timeout=self.timeout)
                if resp.status_code >= 500:
                    raise AdapterError(f"server error {resp.status_code}", retryable=True)
                if resp.status_code >= 400:
                    raise AdapterError(f"client error {resp.status_code}", retryable=False)
                return resp.json()

        self._post = post

    def complete(self, request: CompletionRequest) -> str:
        headers = {}
        if self.api_key_env and os.environ.get(self.api_key_env):
            headers["Authorization"] = f"Bearer {os.environ[self.api_key_env]}"
        payload = {"model": self.model, **request.to_dict()}
        try:
            body = self._post(f"{self.base_url}/completions", payload, headers)
        except AdapterError:
            raise
        except Exception as e:
            raise AdapterError(f"transport failure: {e}", retryable=True) from e
        if "text" not in body:
            raise AdapterError("response missing 'text' field", retryable=False)
        return str(body["text"])


class RecordingAdapter:
    """Wraps a live adapter and stores responses keyed by request hash."""

    id = "recording"

    def __init__(self, inner, directory: str | Path):
        self.inner = inner
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def complete(self, request: CompletionRequest) -> str:
        text = self.inner.complete(request)
        path = self.directory / f"{request_hash(request)}.json"
        path.write_text(
            json.dumps({"request": request.to_dict(), "text": text},
                       sort_keys=True, indent=2),
            encoding="utf-8",
        )
        return text


class ReplayAdapter:
    """Serves recorded responses; unknown requests are an adapter error."""

    id = "replay"

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def complete(self, request: CompletionRequest) -> str:
        path = self.directory / f"{request_hash(request)}.json"
        if not path.exists():
            raise AdapterError(f"no recorded response for request {request_hash(request)}",
                               retryable=False)
        return json.loads(path.read_text(encoding="utf-8"))["text"]


# --- prompt builders ----------------------------------------------------------

def build_rewrite_prompt(question: str) -> CompletionRequest:
    """Ask the model to restate the question as a retrieval intention."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    system = (
        "Restate the user's question as a single retrieval intention: one "
        "sentence naming the kind of information needed to answer it. "
        "Reply with the intention statement only."
    )
    return CompletionRequest(messages=(
        ChatMessage("system", system),
        ChatMessage("user", question),
    ))


def render_param(p) -> str:
    req = "required" if p.required else "optional"
    kind = p.kind if p.kind != "enum" else f"enum{list(p.values)}"
    desc = f" - {p.description}" if p.description else ""
    return f"    - {p.name} ({kind}, {req}){desc}"


def render_tool_block(spec: ToolSpec) -> str:
    lines = [f"- {spec.name}: {spec.description}"]
    for p in spec.params:
        lines.append(render_param(p))
    return "\n".join(lines)


_PAYLOAD_PROMPT_LIMIT = 4000


def render_outcome_line(index: int, call: FunctionCall, outcome) -> str:
    body = outcome.payload if outcome.succeeded else outcome.detail
    if len(body) > _PAYLOAD_PROMPT_LIMIT:
        body = body[:_PAYLOAD_PROMPT_LIMIT] + " ...[truncated]"
    args = canonical_json(call.arguments)
    return (f"[{index}] {call.name}({args}) fingerprint={outcome.fingerprint} "
            f"-> {outcome.status}: {body}")


def build_agent_prompt(question: str, trace, candidates: Sequence[ToolSpec]) -> CompletionRequest:
    """Agentic turn prompt: prior outcomes first, then candidate tools.

    The model must reply with either a JSON list of function calls or a
    final answer line starting with the terminal sentinel.
    """
    system = (
        "You answer therapeutic questions by calling tools. Reply with EITHER "
        "a JSON list of function calls, each {\"name\": ..., \"arguments\": {...}}, "
        f"OR a line starting with {FINAL_SENTINEL} followed by your answer. "
        "Only call tools from the list below."
    )
    parts = [f"Question: {question}"]
    # Feedback steps already carry the outcome lines verbatim, including
    # validation error text; replay them in order.
    feedback = [s.text for s in getattr(trace, "steps", []) if s.kind == "feedback"]
    if feedback:
        parts.append("## Tool results so far\n" + "\n".join(feedback))
    parts.append("## Available tools\n" + "\n".join(render_tool_block(s) for s in candidates))
    parts.append(
        "Decide whether more information is needed. If yes, reply with a "
        "JSON list of function calls. If you can answer, reply with "
        f"{FINAL_SENTINEL} and the answer."
    )
    return CompletionRequest(messages=(
        ChatMessage("system", system),
        ChatMessage("user", "\n\n".join(parts)),
    ))


def build_final_push_prompt(question: str, trace) -> CompletionRequest:
    """Used once the iteration budget is exhausted: demand an answer now."""
    system = (
        f"The tool budget is exhausted. Reply with {FINAL_SENTINEL} followed "
        "by your best answer to the question, using the results so far."
    )
    feedback = [s.text for s in getattr(trace, "steps", []) if s.kind == "feedback"]
    body = f"Question: {question}"
    if feedback:
        body += "\n\n## Tool results so far\n" + "\n".join(feedback)
    return CompletionRequest(messages=(
        ChatMessage("system", system),
        ChatMessage("user", body),
    ))


def render_options(options: Sequence[str]) -> str:
    return "\n".join(f"{label}. {text}" for label, text in zip(OPTION_LABELS, options))


def build_tq_prompt(context: str, query: str,
                    options: Sequence[str] | None = None) -> CompletionRequest:
    """Bare tool-query prompt: retrieved context first, then the query.

    No agentic scaffolding.  An empty context is the no-retrieval setting.
    With options, the four choices are rendered as labeled lines A-D and the
    model is asked for an ANSWER line.
    """
    if not query.strip():
        raise ValueError("query must be non-empty")
    parts = []
    if context:
        parts.append(f"Context:\n{context}")
    parts.append(f"Question:\n{query}")
    if options is not None:
        if len(options) != len(OPTION_LABELS):
            raise ValueError("exactly four options are required")
        parts.append(render_options(options))
        parts.append("Reply with a line of the form ANSWER: <letter>.")
    else:
        parts.append("Answer the question concisely.")
    return CompletionRequest(messages=(ChatMessage("user", "\n\n".join(parts)),))


# --- output parsing -----------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


def _first_balanced_region(text: str) -> tuple[str | None, bool]:
    """First balanced [..] or {..} region; (region, saw_unterminated_start)."""
    start = None
    for i, ch in enumerate(text):
        if ch in "[{":
            start = i
            break
    if start is None:
        return None, False
    depth = 0
    in_string = False
    escape = False
    for j in range(start, len(text)):
        ch = text[j]
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
            if depth == 0:
                return text[start:j + 1], False
    return None, True


def _as_calls(obj: Any) -> tuple[FunctionCall, ...] | None:
    """Interpret parsed JSON as call(s) if it has the {name, arguments} shape."""
    items = obj if isinstance(obj, list) else [obj]
    if not items:
        return None
    calls = []
    for item in items:
        if not isinstance(item, dict) or "name" not in item:
            return None
        if not isinstance(item["name"], str):
            return None
        args = item.get("arguments", {})
        if not isinstance(args, dict):
            return None
        calls.append(FunctionCall(name=item["name"], arguments=args))
    return tuple(calls)


def render_calls(calls: Sequence[FunctionCall]) -> str:
    """Machine form of a calls turn; parse_turn(render_calls(c)) round-trips."""
    return json.dumps([c.to_dict() for c in calls], ensure_ascii=False)


def parse_turn(raw: str, mc: bool = False) -> ModelTurn:
    """Parse model output in grammar order: calls, then final, then choice.

    Candidate JSON regions are fenced code blocks first, then the first
    balanced bracket region; the first candidate that parses as a
    {name, arguments} list wins.  A ParseFailure is feedback for the agent
    loop, never a crash.
    """
    candidates = [m.group(1) for m in _FENCE_RE.finditer(raw)]
    region, unterminated = _first_balanced_region(raw)
    if region is not None:
        candidates.append(region)
    saw_invalid_json = False
    for candidate in candidates:
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            saw_invalid_json = True
            continue
        calls = _as_calls(obj)
        if calls:
            return ModelTurn(kind="calls", raw=raw, calls=calls)

    for line_no, line in enumerate(raw.splitlines()):
        if line.strip().startswith(FINAL_SENTINEL):
            rest = line.strip()[len(FINAL_SENTINEL):].strip()
            trailing = "\n".join(raw.splitlines()[line_no + 1:]).strip()
            answer = (rest + ("\n" + trailing if trailing else "")).strip()
            return ModelTurn(kind="final", raw=raw, text=answer)

    if mc:
        m = ANSWER_RE.search(raw)
        if m:
            return ModelTurn(kind="choice", raw=raw, text=m.group(1).upper())

    if unterminated:
        raise ParseFailure("unterminated JSON region")
    if saw_invalid_json:
        raise ParseFailure("invalid JSON in response")
    raise ParseFailure("no function calls, final answer, or choice found")


def extract_choice(raw: str, options: Sequence[str]) -> str | None:
    """Pull an option letter out of free text; None means unparseable.

    Primary form is an `ANSWER: X` line.  Fallback: exactly one option
    letter mentioned as a standalone capital.  Ambiguity is unparseable and
    scores as incorrect, never dropped.
    """
    if len(options) != len(OPTION_LABELS):
        raise ValueError("exactly four options are required")
    m = ANSWER_RE.search(raw)
    if m:
        return m.group(1).upper()
    mentioned = {m for m in re.findall(r"\b([A-D])\b", raw)}
    if len(mentioned) == 1:
        return mentioned.pop()
    return None
