"""Drives benchmark sweeps: (mode x permutation) settings over a dataset.

Results are cached per (question, setting) so interrupted runs resume
without re-consulting the model adapter.  Aggregation is always ordered by
dataset position, regardless of worker completion order.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .agent import SessionConfig, run_session, with_mode
from .bench import (
    DEFAULT_PERMUTATION,
    EvalReport,
    PermutationSpec,
    Question,
    RetrievalRow,
    SettingRow,
    compute_deltas,
    permute_options,
    ranking_metrics,
    score,
)
from .errors import (
    ConfigError,
    EngineError,
    SessionAbort,
    UnknownBackend,
)
from .executor import ExecutionEnv
from .llm import build_tq_prompt, extract_choice, render_options
from .registry import Registry
from .retrieval import (
    HashEmbeddingProvider,
    RetrievalConfig,
    build_backend,
    retrieve_top_k,
)
from .trace import (
    AgentTrace,
    TerminationStep,
    TickClock,
    freeze_context,
    read_jsonl,
    write_jsonl,
)

MODE_ALIASES = {
    "agentic": "agentic",
    "fixed": "fixed_retrieval",
    "fixed_retrieval": "fixed_retrieval",
    "none": "no_retrieval",
    "no_retrieval": "no_retrieval",
}


@dataclass(frozen=True)
class Setting:
    mode: str
    permuted: bool

    @property
    def key(self) -> str:
        return f"{self.mode}{'+perm' if self.permuted else ''}"


def parse_settings(modes: Sequence[str], permute: str) -> list[Setting]:
    """Build the settings matrix from mode names and a permute policy."""
    canonical = []
    for mode in modes:
        if mode not in MODE_ALIASES:
            raise ConfigError(f"unknown mode {mode!r}")
        canonical.append(MODE_ALIASES[mode])
    if permute == "original":
        flags = [False]
    elif permute == "permuted":
        flags = [True]
    elif permute == "both":
        flags = [False, True]
    else:
        raise ConfigError(f"unknown permute policy {permute!r}")
    settings = [Setting(mode=m, permuted=p) for m in canonical for p in flags]
    if not settings:
        raise ConfigError("settings matrix is empty")
    return settings


@dataclass
class QuestionResult:
    question_id: str
    setting: str
    style: str
    answer: str | None
    unparseable: bool
    trace_path: str | None = None

    def to_dict(self):
        return vars(self)


class BenchRunner:
    """Evaluates questions across settings with resumable caching."""

    def __init__(
        self,
        registry: Registry,
        adapter_factory: Callable[[str], object],
        env: ExecutionEnv,
        session_config: SessionConfig,
        out_dir: str | Path,
        model_id: str = "scripted",
        frozen_contexts: dict[str, str] | None = None,
        permutation: PermutationSpec = DEFAULT_PERMUTATION,
        clock_factory: Callable[[], object] = TickClock,
        workers: int = 1,
    ):
        self.registry = registry
        self.adapter_factory = adapter_factory
        self.env = env
        self.session_config = session_config
        self.out_dir = Path(out_dir)
        self.model_id = model_id
        self.frozen_contexts = frozen_contexts
        self.permutation = permutation
        self.clock_factory = clock_factory
        self.workers = max(1, workers)

    # -- caching -------------------------------------------------------------

    def _cache_path(self, setting: Setting, question_id: str) -> Path:
        return self.out_dir / "cache" / setting.key / f"{question_id}.json"

    def _load_cached(self, setting: Setting, question_id: str) -> QuestionResult | None:
        p = self._cache_path(setting, question_id)
        if not p.exists():
            return None
        d = json.loads(p.read_text(encoding="utf-8"))
        return QuestionResult(**d)

    def _store(self, setting: Setting, result: QuestionResult) -> None:
        p = self._cache_path(setting, result.question_id)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(result.to_dict(), sort_keys=True, indent=2),
                     encoding="utf-8")

    # -- evaluation ----------------------------------------------------------

    def _question_variant(self, question: Question, setting: Setting) -> Question:
        if setting.permuted and question.style != "OE":
            return permute_options(question, self.permutation)
        return question

    def _context_for(self, question: Question, mode: str) -> str:
        if mode != "fixed_retrieval":
            return ""
        if self.frozen_contexts is None:
            raise ConfigError("fixed_retrieval setting requires frozen contexts")
        return self.frozen_contexts.get(question.id, "")

    def _session(self, prompt: str, mode: str, context: str, adapter, clock,
                 setting: Setting, question_id: str,
                 options: Sequence[str] | None = None) -> tuple[AgentTrace, str]:
        config = with_mode(self.session_config, mode,
                           context if mode == "fixed_retrieval" else None)
        if mode == "agentic" and options is not None:
            prompt = (f"{prompt}\n\nOptions:\n{render_options(options)}\n\n"
                      "Name the correct option letter in your final answer.")
            trace, answer = run_session(
                prompt, self.registry, adapter, self.env, config,
                session_id=f"{setting.key}:{question_id}",
                question_id=question_id, clock=clock)
            return trace, answer
        if mode == "agentic":
            return run_session(
                prompt, self.registry, adapter, self.env, config,
                session_id=f"{setting.key}:{question_id}",
                question_id=question_id, clock=clock)
        # bare TQ completion; options go into the prompt when present
        raw = adapter.complete(build_tq_prompt(context, prompt, options))
        trace = AgentTrace(
            session_id=f"{setting.key}:{question_id}", question_id=question_id,
            mode=mode, frozen_context=context if mode == "fixed_retrieval" else None,
            config=config.echo())
        trace.add(TerminationStep(reason="final", answer=raw.strip()), clock.now())
        return trace, raw.strip()

    def evaluate_question(self, question: Question, setting: Setting) -> QuestionResult:
        cached = self._load_cached(setting, question.id)
        if cached is not None:
            return cached
        q = self._question_variant(question, setting)
        adapter = self.adapter_factory(q.id)
        clock = self.clock_factory()
        context = self._context_for(q, setting.mode)
        answer: str | None
        trace = None
        try:
            if q.style == "MC":
                trace, raw = self._session(q.prompt, setting.mode, context, adapter,
                                           clock, setting, q.id, options=q.options)
                answer = extract_choice(raw, q.options)
            elif q.style == "OE":
                trace, raw = self._session(q.prompt, setting.mode, context, adapter,
                                           clock, setting, q.id)
                answer = raw if raw else None
            else:  # OEMC: free answer first, then use it as context to choose
                trace, free_text = self._session(q.prompt, setting.mode, context,
                                                 adapter, clock, setting, q.id)
                raw = adapter.complete(build_tq_prompt(free_text, q.prompt, q.options))
                answer = extract_choice(raw, q.options)
        except SessionAbort as e:
            trace = e.trace
            answer = None
        except EngineError:
            answer = None

        trace_path = None
        if trace is not None:
            rel = Path("traces") / setting.key / f"{question.id}.jsonl"
            write_jsonl(trace, self.out_dir / rel)
            trace_path = str(rel)
        result = QuestionResult(
            question_id=question.id,
            setting=setting.key,
            style=question.style,
            answer=answer,
            unparseable=answer is None,
            trace_path=trace_path,
        )
        self._store(setting, result)
        return result

    def run(self, questions: Sequence[Question], settings: Sequence[Setting]) -> EvalReport:
        rows: list[SettingRow] = []
        for setting in settings:
            if setting.mode == "fixed_retrieval" and self.frozen_contexts is None:
                raise ConfigError("fixed_retrieval setting requires frozen contexts")
            results: dict[str, QuestionResult] = {}
            if self.workers == 1:
                for q in questions:
                    results[q.id] = self.evaluate_question(q, setting)
            else:
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    futures = {q.id: pool.submit(self.evaluate_question, q, setting)
                               for q in questions}
                for qid, fut in futures.items():
                    results[qid] = fut.result()
            for style in ("MC", "OE", "OEMC"):
                styled = [q for q in questions if q.style == style]
                if not styled:
                    continue
                variants = [self._question_variant(q, setting) for q in styled]
                predictions = {q.id: results[q.id].answer for q in styled}
                sr = score(predictions, variants)
                rows.append(SettingRow(
                    model=self.model_id,
                    setting=setting.key,
                    style=style,
                    permuted=setting.permuted,
                    n=sr.n,
                    accuracy=sr.accuracy,
                    rel_delta=0.0,
                    unparseable=sr.unparseable,
                ))
        return EvalReport(rows=compute_deltas(rows), config={
            "model": self.model_id,
            "settings": [s.key for s in settings],
            "permutation": self.permutation.as_dict(),
            "session": self.session_config.echo(),
            "workers": self.workers,
        })


def freeze_contexts_from_traces(trace_dir: str | Path) -> dict[str, str]:
    """question id -> frozen context, from every trace file in a directory."""
    contexts: dict[str, str] = {}
    for path in sorted(Path(trace_dir).glob("*.jsonl")):
        trace = read_jsonl(path)
        contexts[trace.question_id] = freeze_context(trace)
    return contexts


# --- retriever comparison -----------------------------------------------------

RETRIEVER_BACKENDS = ("bm25", "dense-hash", "none")


def compare_retrievers(
    registry: Registry,
    annotated_queries: Sequence[dict],
    backends: Sequence[str],
    k: int = 10,
    dimension: int = 512,
) -> EvalReport:
    """recall@k and MRR per backend over one identical query set."""
    rows: list[RetrievalRow] = []
    for backend in backends:
        if backend not in RETRIEVER_BACKENDS:
            raise UnknownBackend(f"unknown retriever backend {backend!r}")
        if backend == "dense-hash":
            config = RetrievalConfig(backend="dense", k=k, dimension=dimension)
            state = build_backend(registry, config, HashEmbeddingProvider(dimension))
        else:
            config = RetrievalConfig(backend=backend, k=k)
            state = build_backend(registry, config)
        rankings = []
        for item in annotated_queries:
            ranked = retrieve_top_k(state, item["query"], config)
            rankings.append((ranked.names(), set(item["gold_tools"])))
        row = ranking_metrics(rankings, k, backend=backend)
        rows.append(row)
    return EvalReport(retrieval_rows=rows, config={"k": k, "backends": list(backends)})


def load_annotated_queries(path: str | Path) -> list[dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, list):
        raise ConfigError("annotated query file must be a JSON list")
    for item in doc:
        if "query" not in item or "gold_tools" not in item:
            raise ConfigError("annotated query records need 'query' and 'gold_tools'")
    return doc
