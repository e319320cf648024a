"""Benchmark harness: datasets, option permutation, scoring, reports.

Questions come in three styles: direct multiple choice (MC), open ended
(OE), and the two-step open-ended multiple choice (OEMC) where a free-text
answer is generated first and then used as context to pick an option.
"""

from __future__ import annotations

import csv
import json
import re
import string
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import (
    MissingGold,
    MissingOptions,
    NoRetrievalSteps,
    ParseError,
    SchemaError,
    StyleError,
    UnknownQuestionId,
)
from .trace import AgentTrace

STYLES = ("MC", "OE", "OEMC")
LABELS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class Question:
    """One benchmark item; options/gold presence depends on style."""

    id: str
    style: str
    prompt: str
    options: tuple[str, ...] = ()
    gold: str | None = None

    def problems(self) -> list[str]:
        out = []
        if not self.id:
            out.append("missing id")
        if self.style not in STYLES:
            out.append(f"unknown style {self.style!r}")
        if not self.prompt:
            out.append("empty question text")
        if self.style in ("MC", "OEMC"):
            if len(self.options) != 4:
                out.append(f"{self.style} question needs exactly 4 options, has {len(self.options)}")
            elif self.gold is not None and self.gold not in LABELS:
                out.append(f"gold label {self.gold!r} is not one of {list(LABELS)}")
        elif self.style == "OE" and self.options:
            out.append("OE question must not carry options")
        return out

    def gold_text(self) -> str | None:
        if self.style == "OE":
            return self.gold
        if self.gold is None:
            return None
        return self.options[LABELS.index(self.gold)]

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"id": self.id, "style": self.style, "question": self.prompt}
        if self.options:
            d["options"] = list(self.options)
        if self.gold is not None:
            d["gold"] = self.gold
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Question":
        return cls(
            id=str(d.get("id", "")),
            style=str(d.get("style", "")),
            prompt=str(d.get("question", "")),
            options=tuple(str(o) for o in d.get("options", [])),
            gold=None if d.get("gold") is None else str(d["gold"]),
        )


@dataclass(frozen=True)
class DatasetManifest:
    """Dataset name, total question count, and per-style counts."""

    name: str
    question_count: int
    style_counts: dict[str, int] = field(compare=True, default_factory=dict)

    @property
    def consistent(self) -> bool:
        return sum(self.style_counts.values()) == self.question_count

    @classmethod
    def from_questions(cls, name: str, questions: Sequence[Question]) -> "DatasetManifest":
        counts = {s: 0 for s in STYLES}
        for q in questions:
            counts[q.style] += 1
        return cls(name=name, question_count=len(questions), style_counts=counts)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "question_count": self.question_count,
            "style_counts": dict(self.style_counts),
            "consistent": self.consistent,
        }


def load_dataset(path: str | Path) -> tuple[DatasetManifest, list[Question]]:
    """Load a dataset file: a JSON list of question records.

    The manifest's counts are computed from the data.  All schema problems
    are aggregated into one error naming the offending question ids.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"dataset is not valid JSON: {e.msg}", e.lineno, e.colno) from e
    if not isinstance(doc, list):
        raise ParseError("dataset must be a JSON list of question records")
    questions = []
    bad: list[tuple[str, list[str]]] = []
    for i, record in enumerate(doc):
        if not isinstance(record, dict):
            bad.append((f"#{i}", ["record is not an object"]))
            continue
        q = Question.from_dict(record)
        problems = q.problems()
        if problems:
            bad.append((q.id or f"#{i}", problems))
        else:
            questions.append(q)
    if bad:
        detail = "; ".join(f"{qid}: {', '.join(ps)}" for qid, ps in bad)
        raise SchemaError(f"invalid question records: {detail}",
                          question_ids=[qid for qid, _ in bad])
    return DatasetManifest.from_questions(path.stem, questions), questions


def save_dataset(questions: Sequence[Question], path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(
        json.dumps([q.to_dict() for q in questions], indent=2, ensure_ascii=False),
        encoding="utf-8",
    )


# --- style derivation and option permutation -----------------------------------

def derive_styles(question: Question) -> dict[str, Question]:
    """Build the MC and OEMC variants of a labeled question.

    Variants keep the content and gold; ids gain a style suffix
    (``<id>#mc`` / ``<id>#oemc``).
    """
    if len(question.options) != 4:
        raise MissingOptions(f"question {question.id} has no options to derive from")
    if question.gold is None:
        raise MissingGold(f"question {question.id} has no gold answer")
    return {
        "MC": replace(question, id=f"{question.id}#mc", style="MC"),
        "OEMC": replace(question, id=f"{question.id}#oemc", style="OEMC"),
    }


@dataclass(frozen=True)
class PermutationSpec:
    """Bijection over option labels: new_options[L] = old_options[mapping[L]]."""

    mapping: tuple[tuple[str, str], ...]

    def __post_init__(self):
        m = dict(self.mapping)
        if sorted(m) != list(LABELS) or sorted(m.values()) != list(LABELS):
            raise ValueError(f"mapping must be a bijection over {LABELS}")

    @classmethod
    def from_dict(cls, mapping: dict[str, str]) -> "PermutationSpec":
        return cls(tuple(sorted(mapping.items())))

    def as_dict(self) -> dict[str, str]:
        return dict(self.mapping)

    def inverse(self) -> "PermutationSpec":
        return PermutationSpec.from_dict({v: k for k, v in self.mapping})

    @classmethod
    def identity(cls) -> "PermutationSpec":
        return cls.from_dict({label: label for label in LABELS})


# The published default: option sequence [A, B, C, D] becomes [B, D, A, C].
DEFAULT_PERMUTATION = PermutationSpec.from_dict({"A": "B", "B": "D", "C": "A", "D": "C"})


def permute_options(question: Question, spec: PermutationSpec) -> Question:
    """Relocate option texts per spec and remap gold so its text is unchanged."""
    if question.style == "OE":
        raise StyleError("OE questions have no options to permute")
    if len(question.options) != 4:
        raise MissingOptions(f"question {question.id} has no options")
    mapping = spec.as_dict()
    new_options = tuple(
        question.options[LABELS.index(mapping[label])] for label in LABELS
    )
    new_gold = question.gold
    if question.gold is not None:
        new_gold = spec.inverse().as_dict()[question.gold]
    return replace(question, options=new_options, gold=new_gold)


def remap_prediction(answer: str | None, spec: PermutationSpec) -> str | None:
    """Move a predicted label into the permuted label space."""
    if answer in LABELS:
        return spec.inverse().as_dict()[answer]
    return answer


# --- scoring --------------------------------------------------------------------

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_text(text: str) -> str:
    return re.sub(r"\s+", " ", text.translate(_PUNCT_TABLE).lower()).strip()


@dataclass(frozen=True)
class ScoreRow:
    question_id: str
    gold: str
    answer: str | None
    correct: bool
    unparseable: bool


@dataclass(frozen=True)
class ScoreResult:
    accuracy: float
    n: int
    unparseable: int
    rows: tuple[ScoreRow, ...]


def score(predictions: dict[str, str | None], questions: Sequence[Question]) -> ScoreResult:
    """Accuracy over a question set; unparseable predictions count as wrong.

    MC/OEMC compare option labels; OE compares normalized free text.
    Questions without a prediction are unparseable misses.
    """
    by_id = {q.id: q for q in questions}
    for pid in predictions:
        if pid not in by_id:
            raise UnknownQuestionId(f"prediction for unknown question {pid!r}")
    rows = []
    correct_count = 0
    unparseable_count = 0
    for q in questions:
        if q.gold is None:
            raise MissingGold(f"question {q.id} has no gold answer")
        answer = predictions.get(q.id)
        if q.style in ("MC", "OEMC"):
            parsed = answer if answer in LABELS else None
            correct = parsed == q.gold
            unparseable = parsed is None
        else:
            unparseable = answer is None
            correct = answer is not None and normalize_text(answer) == normalize_text(q.gold)
        rows.append(ScoreRow(q.id, q.gold, answer, correct, unparseable))
        correct_count += int(correct)
        unparseable_count += int(unparseable)
    n = len(questions)
    return ScoreResult(
        accuracy=correct_count / n if n else 0.0,
        n=n,
        unparseable=unparseable_count,
        rows=tuple(rows),
    )


# --- retrieval quality ------------------------------------------------------------

@dataclass(frozen=True)
class RetrievalRow:
    backend: str
    k: int
    n: int
    recall: float
    mrr: float


def ranking_metrics(rankings: Sequence[tuple[Sequence[str], set[str]]], k: int,
                    backend: str = "") -> RetrievalRow:
    """recall@k and mean reciprocal rank over (ranked names, gold names) pairs."""
    hits = 0
    rr_total = 0.0
    for ranked, gold in rankings:
        top = list(ranked)[:k]
        rank = next((i + 1 for i, name in enumerate(top) if name in gold), None)
        if rank is not None:
            hits += 1
            rr_total += 1.0 / rank
    n = len(rankings)
    return RetrievalRow(
        backend=backend,
        k=k,
        n=n,
        recall=hits / n if n else 0.0,
        mrr=rr_total / n if n else 0.0,
    )


def retrieval_recall_at_k(traces: Sequence[AgentTrace],
                          gold_tools: dict[str, set[str]], k: int,
                          backend: str = "") -> RetrievalRow:
    """Score the first retrieval step of each trace against gold tool names."""
    rankings = []
    for trace in traces:
        retrievals = trace.steps_of("retrieval")
        if not retrievals:
            raise NoRetrievalSteps(f"trace {trace.session_id} has no retrieval step")
        ranked = retrievals[0].ranked.names()
        rankings.append((ranked, gold_tools.get(trace.question_id, set())))
    return ranking_metrics(rankings, k, backend=backend)


# --- reports -----------------------------------------------------------------------

@dataclass(frozen=True)
class SettingRow:
    model: str
    setting: str
    style: str
    permuted: bool
    n: int
    accuracy: float
    rel_delta: float
    unparseable: int


@dataclass
class EvalReport:
    rows: list[SettingRow] = field(default_factory=list)
    retrieval_rows: list[RetrievalRow] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)

    def __eq__(self, other):
        return (isinstance(other, EvalReport)
                and self.rows == other.rows
                and self.retrieval_rows == other.retrieval_rows)


def compute_deltas(rows: Iterable[SettingRow]) -> list[SettingRow]:
    """rel_delta = (accuracy - best) / best; the best row is exactly 0."""
    rows = list(rows)
    if not rows:
        return rows
    best = max(r.accuracy for r in rows)
    if best == 0.0:
        return [replace(r, rel_delta=0.0) for r in rows]
    return [replace(r, rel_delta=(r.accuracy - best) / best) for r in rows]


CSV_COLUMNS = ("model", "setting", "style", "permuted", "n",
               "accuracy", "rel_delta", "unparseable")
RETRIEVAL_COLUMNS = ("backend", "k", "n", "recall", "mrr")


def emit_report(report: EvalReport, out_dir: str | Path,
                basename: str = "report") -> dict[str, Path]:
    """Write CSV and JSON forms; deltas are recomputed before writing."""
    if not report.rows and not report.retrieval_rows:
        raise ValueError("report is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = compute_deltas(report.rows)
    paths: dict[str, Path] = {}

    csv_path = out / f"{basename}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([r.model, r.setting, r.style,
                             "true" if r.permuted else "false",
                             r.n, repr(r.accuracy), repr(r.rel_delta), r.unparseable])
    paths["csv"] = csv_path

    if report.retrieval_rows:
        rpath = out / f"{basename}_retrieval.csv"
        with open(rpath, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RETRIEVAL_COLUMNS)
            for r in report.retrieval_rows:
                writer.writerow([r.backend, r.k, r.n, repr(r.recall), repr(r.mrr)])
        paths["retrieval_csv"] = rpath

    json_path = out / f"{basename}.json"
    json_path.write_text(json.dumps({
        "rows": [vars(r) for r in rows],
        "retrieval": [vars(r) for r in report.retrieval_rows],
        "config": report.config,
    }, indent=2, sort_keys=True), encoding="utf-8")
    paths["json"] = json_path
    return paths


def parse_report(csv_path: str | Path) -> EvalReport:
    """Read a settings CSV back into a report; inverse of emit_report's CSV."""
    rows = []
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"report CSV missing columns: {missing}")
        for record in reader:
            rows.append(SettingRow(
                model=record["model"],
                setting=record["setting"],
                style=record["style"],
                permuted=record["permuted"] == "true",
                n=int(record["n"]),
                accuracy=float(record["accuracy"]),
                rel_delta=float(record["rel_delta"]),
                unparseable=int(record["unparseable"]),
            ))
    return EvalReport(rows=rows)
