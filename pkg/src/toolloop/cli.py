"""Command-line entry point.

Subcommands: ask, bench, retrievers, registry-validate, record-fixtures,
trace-inspect, gen-dataset, gen-corpus.  Flag values override config-file
values, which override defaults; the effective configuration is echoed
into every emitted report.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .agent import SessionConfig, run_session
from .bench import DatasetManifest, load_dataset, save_dataset
from .errors import EngineError
from .executor import ExecutionEnv, FixtureStore, RequestsTransport
from .llm import HttpAdapter, ScriptBook
from .registry import Registry, load_registry, validate_call
from .calls import FunctionCall
from .retrieval import RetrievalConfig
from .runner import (
    RETRIEVER_BACKENDS,
    BenchRunner,
    compare_retrievers,
    load_annotated_queries,
    parse_settings,
)
from .synth import DATASET_SHAPES, gen_corpus, gen_dataset, write_corpus
from .trace import SystemClock, TickClock, freeze_context, read_jsonl, summarize, write_jsonl
from . import labels  # noqa: F401  (registers the drug-label builtins)

from .bench import emit_report


class Parser(argparse.ArgumentParser):
    """argparse, but usage errors (including unknown flags) exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def data_path(*parts: str) -> Path:
    return Path(resources.files("toolloop")) / "data" / Path(*parts)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _setting(args, config_file: dict, name: str, default):
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if name in config_file:
        return config_file[name]
    return default


def _resolve_registry(path: str) -> Registry:
    if path == "builtin":
        return load_registry(str(data_path("registry.json")))
    return load_registry(path)


def _named_fixture_dir(registry_path: str) -> Path | None:
    if registry_path == "builtin":
        return data_path("named_fixtures")
    candidate = Path(registry_path).parent / "named_fixtures"
    return candidate if candidate.is_dir() else None


def _build_adapter_factory(spec: str):
    """adapter spec -> (factory(question_id) -> adapter, model id, scripted?)."""
    if spec == "demo":
        book = ScriptBook.load(data_path("scripts", "demo_ask.json"))
        return book.adapter_for, "scripted-demo", True
    if spec.startswith("scripted:"):
        book = ScriptBook.load(spec.split(":", 1)[1])
        return book.adapter_for, "scripted", True
    if spec.startswith("http:"):
        rest = spec.split(":", 1)[1]
        base_url, _, model = rest.partition("@")
        adapter = HttpAdapter(base_url=base_url, model=model or "default",
                              api_key_env="TOOLLOOP_API_KEY")
        return (lambda _qid: adapter), adapter.id, False
    raise EngineError(f"unknown adapter spec {spec!r}; "
                      "use demo, scripted:<path>, or http:<url>@<model>")


def _build_env(args, config_file: dict, mode_override: str | None = None,
               deterministic: bool = False) -> ExecutionEnv:
    fixtures_only = bool(_setting(args, config_file, "fixtures-only", False))
    mode = mode_override or ("fixtures_only" if fixtures_only else "live")
    store_dir = _setting(args, config_file, "fixtures", None)
    store = FixtureStore(store_dir) if store_dir else None
    if mode == "fixtures_only" and store is None and getattr(args, "registry", None):
        bundled = (data_path("http_fixtures") if args.registry == "builtin"
                   else Path(args.registry).parent / "http_fixtures")
        if bundled.is_dir():
            store = FixtureStore(bundled)
    transport = None if mode == "fixtures_only" else RequestsTransport()
    env = ExecutionEnv(
        mode=mode,
        transport=transport,
        store=store,
        named_fixture_dir=_named_fixture_dir(getattr(args, "registry", "") or ""),
    )
    if deterministic:
        env.clock = lambda: 0.0  # fixed latencies keep scripted runs byte-identical
    return env


def _session_config(args, config_file: dict) -> SessionConfig:
    return SessionConfig(
        retrieval=RetrievalConfig(
            backend=_setting(args, config_file, "backend", "bm25"),
            k=int(_setting(args, config_file, "k", 10)),
        ),
        max_iterations=int(_setting(args, config_file, "max-iters", 10)),
        repeated_call_policy=_setting(args, config_file, "repeat-policy", "cached"),
    )


# --- subcommands ----------------------------------------------------------------

def cmd_ask(args) -> int:
    config_file = _load_config_file(args.config)
    registry = _resolve_registry(args.registry)
    factory, model_id, scripted = _build_adapter_factory(args.adapter)
    env = _build_env(args, config_file, deterministic=scripted)
    session_config = _session_config(args, config_file)
    clock = TickClock() if scripted else SystemClock()
    out_dir = Path(_setting(args, config_file, "out", "out"))

    trace, answer = run_session(
        args.question, registry, factory("ask"), env, session_config,
        session_id="ask-0", question_id="ask", clock=clock)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.jsonl"
    write_jsonl(trace, trace_path)
    print(answer)
    print(f"trace: {trace_path}", file=sys.stderr)
    termination = trace.termination
    return 2 if termination and termination.reason == "budget_exhausted" else 0


def cmd_bench(args) -> int:
    config_file = _load_config_file(args.config)
    registry = _resolve_registry(args.registry)
    manifest, questions = load_dataset(args.dataset)
    settings = parse_settings(
        [m.strip() for m in _setting(args, config_file, "mode", "agentic").split(",") if m.strip()],
        _setting(args, config_file, "permute", "original"),
    )
    factory, model_id, scripted = _build_adapter_factory(args.adapter)
    env = _build_env(args, config_file, deterministic=scripted)
    frozen = None
    if args.frozen:
        frozen = json.loads(Path(args.frozen).read_text(encoding="utf-8"))
    out_dir = Path(_setting(args, config_file, "out", "out"))
    runner = BenchRunner(
        registry=registry,
        adapter_factory=factory,
        env=env,
        session_config=_session_config(args, config_file),
        out_dir=out_dir,
        model_id=model_id,
        frozen_contexts=frozen,
        clock_factory=TickClock if scripted else SystemClock,
        workers=int(_setting(args, config_file, "workers", 1)),
    )
    report = runner.run(questions, settings)
    report.config["dataset"] = manifest.to_dict()
    paths = emit_report(report, out_dir)
    for row in report.rows:
        print(f"{row.setting:24s} {row.style:5s} n={row.n:4d} "
              f"acc={row.accuracy:.3f} delta={row.rel_delta:+.1%} "
              f"unparseable={row.unparseable}")
    print(f"report: {paths['csv']}", file=sys.stderr)
    return 0


def cmd_retrievers(args) -> int:
    config_file = _load_config_file(args.config)
    registry = _resolve_registry(args.registry)
    queries = load_annotated_queries(args.queries)
    backends = [b.strip() for b in args.backends.split(",") if b.strip()]
    k = int(_setting(args, config_file, "k", 10))
    report = compare_retrievers(registry, queries, backends, k=k)
    out_dir = Path(_setting(args, config_file, "out", "out"))
    paths = emit_report(report, out_dir, basename="retrievers")
    for row in report.retrieval_rows:
        print(f"{row.backend:12s} k={row.k} n={row.n} "
              f"recall@{row.k}={row.recall:.3f} mrr={row.mrr:.3f}")
    print(f"report: {paths['retrieval_csv']}", file=sys.stderr)
    return 0


def cmd_registry_validate(args) -> int:
    registry = _resolve_registry(args.registry)
    warnings = []
    for spec in registry.specs():
        warnings.extend(spec.lint_warnings())
    print(f"{len(registry)} tools, registry version {registry.version}")
    for w in warnings:
        print(f"warning: {w}")
    return 0


def cmd_record_fixtures(args) -> int:
    registry = _resolve_registry(args.registry)
    calls = json.loads(Path(args.calls).read_text(encoding="utf-8"))
    env = ExecutionEnv(
        mode="record",
        transport=RequestsTransport(),
        store=FixtureStore(args.fixtures),
        named_fixture_dir=_named_fixture_dir(args.registry),
    )
    from .executor import execute

    failures = 0
    for entry in calls:
        call = FunctionCall(name=entry["name"], arguments=entry.get("arguments", {}))
        validated = validate_call(registry, call)
        outcome = execute(env, validated)
        print(f"{call.name}: {outcome.status}"
              + (f" ({outcome.detail})" if outcome.detail else ""))
        failures += int(not outcome.succeeded)
    return 1 if failures else 0


def cmd_trace_inspect(args) -> int:
    trace = read_jsonl(args.trace)
    if args.freeze:
        print(freeze_context(trace))
    else:
        print(summarize(trace))
    return 0


def cmd_gen_dataset(args) -> int:
    manifest, questions = gen_dataset(args.shape, seed=args.seed)
    out = Path(args.out)
    save_dataset(questions, out)
    computed = DatasetManifest.from_questions(args.shape, questions)
    manifest_path = out.with_suffix(".manifest.json")
    manifest_path.write_text(json.dumps({
        "declared": manifest.to_dict(),
        "computed": computed.to_dict(),
    }, indent=2, sort_keys=True), encoding="utf-8")
    print(f"declared: {manifest.question_count} questions {manifest.style_counts}")
    print(f"computed: {computed.question_count} questions {computed.style_counts}")
    print(f"dataset: {out}", file=sys.stderr)
    return 0


def cmd_gen_corpus(args) -> int:
    registry, queries = gen_corpus(args.kind, n_questions=args.questions, seed=args.seed)
    paths = write_corpus(registry, queries, args.out)
    print(f"{len(registry)} tools, {len(queries)} annotated queries")
    print(f"corpus: {paths['registry']}", file=sys.stderr)
    return 0


# --- wiring ----------------------------------------------------------------------

def build_parser() -> Parser:
    parser = Parser(prog="toolloop",
                    description="Agentic tool-calling engine and benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    def common(p: Parser, *, registry=False, adapter=False, out=False):
        if registry:
            p.add_argument("--registry", required=True,
                           help="registry JSON path, or 'builtin' for the bundled one")
        if adapter:
            p.add_argument("--adapter", required=True,
                           help="demo | scripted:<script.json> | http:<url>@<model>")
        if out:
            p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--config", default=None, help="JSON config file (flags win)")
        p.add_argument("--fixtures", default=None, help="HTTP fixture/cache directory")
        p.add_argument("--fixtures-only", action="store_true", default=None,
                       help="hermetic mode: serve fixtures, never touch the network")
        p.add_argument("--k", type=int, default=None, help="retrieval top-k (default 10)")
        p.add_argument("--backend", default=None, help="retrieval backend: bm25|dense|none")
        p.add_argument("--max-iters", type=int, default=None,
                       help="agentic iteration budget (default 10)")
        p.add_argument("--repeat-policy", default=None, choices=["cached", "reject", "off"],
                       help="repeated identical call handling (default cached)")

    p = sub.add_parser("ask", parents=[], help="answer one question agentically")
    common(p, registry=True, adapter=True, out=True)
    p.add_argument("--question", required=True)
    p.set_defaults(fn=cmd_ask)

    p = sub.add_parser("bench", help="run a benchmark sweep")
    common(p, registry=True, adapter=True, out=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", default=None,
                   help="comma list of agentic,fixed,none (default agentic)")
    p.add_argument("--permute", default=None, choices=["original", "permuted", "both"])
    p.add_argument("--frozen", default=None,
                   help="JSON map question id -> frozen context (fixed mode)")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("retrievers", help="compare retrieval backends on a corpus")
    common(p, registry=True, out=True)
    p.add_argument("--queries", required=True, help="annotated queries JSON")
    p.add_argument("--backends", default=",".join(RETRIEVER_BACKENDS))
    p.set_defaults(fn=cmd_retrievers)

    p = sub.add_parser("registry-validate", help="check a registry document")
    common(p, registry=True)
    p.set_defaults(fn=cmd_registry_validate)

    p = sub.add_parser("record-fixtures", help="execute calls live and store fixtures")
    common(p, registry=True)
    p.add_argument("--calls", required=True, help="JSON list of {name, arguments}")
    p.set_defaults(fn=cmd_record_fixtures)

    p = sub.add_parser("trace-inspect", help="summarize or freeze a trace file")
    p.add_argument("--trace", required=True)
    p.add_argument("--freeze", action="store_true",
                   help="print the frozen context instead of the summary")
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_trace_inspect)

    p = sub.add_parser("gen-dataset", help="generate a synthetic dataset")
    p.add_argument("--shape", required=True, choices=sorted(DATASET_SHAPES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset JSON path")
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_gen_dataset)

    p = sub.add_parser("gen-corpus", help="generate an annotated retrieval corpus")
    p.add_argument("--kind", required=True, choices=["exact", "paraphrase"])
    p.add_argument("--questions", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_gen_corpus)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except EngineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
