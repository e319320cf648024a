import json
import random

import pytest

from toolloop.bench import (
    DEFAULT_PERMUTATION,
    CSV_COLUMNS,
    DatasetManifest,
    EvalReport,
    PermutationSpec,
    Question,
    SettingRow,
    compute_deltas,
    derive_styles,
    emit_report,
    load_dataset,
    normalize_text,
    parse_report,
    permute_options,
    ranking_metrics,
    remap_prediction,
    retrieval_recall_at_k,
    save_dataset,
    score,
)
from toolloop.errors import (
    MissingGold,
    MissingOptions,
    NoRetrievalSteps,
    ParseError,
    SchemaError,
    StyleError,
    UnknownQuestionId,
)
from toolloop.trace import AgentTrace, RetrievalStep
from toolloop.retrieval import RankedTools

LABELS = ("A", "B", "C", "D")


def mc_question(qid="q1", gold="A", style="MC"):
    return Question(id=qid, style=style, prompt="Which statement is true?",
                    options=("opt a", "opt b", "opt c", "opt d"), gold=gold)


def random_mc(rng, qid):
    options = tuple(f"text-{rng.randrange(10**6)}-{i}" for i in range(4))
    return Question(id=qid, style="MC", prompt=f"Q {qid}?",
                    options=options, gold=rng.choice(LABELS))


def random_bijection(rng) -> PermutationSpec:
    shuffled = list(LABELS)
    rng.shuffle(shuffled)
    return PermutationSpec.from_dict(dict(zip(LABELS, shuffled)))


# --- datasets ---------------------------------------------------------------------


def test_dataset_round_trip(tmp_path):
    questions = [mc_question("a"), mc_question("b", style="OEMC"),
                 Question(id="c", style="OE", prompt="Explain.", gold="free text")]
    path = tmp_path / "ds.json"
    save_dataset(questions, path)
    manifest, loaded = load_dataset(path)
    assert loaded == questions
    assert manifest.question_count == 3
    assert manifest.style_counts == {"MC": 1, "OE": 1, "OEMC": 1}
    assert manifest.consistent
    # loading twice yields identical manifests
    assert load_dataset(path)[0] == manifest


def test_dataset_schema_error_names_question(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps([
        {"id": "ok1", "style": "MC", "question": "q",
         "options": ["a", "b", "c", "d"], "gold": "A"},
        {"id": "bad1", "style": "MC", "question": "q",
         "options": ["a", "b", "c"], "gold": "A"},
    ]))
    with pytest.raises(SchemaError) as exc:
        load_dataset(path)
    assert "bad1" in str(exc.value)
    assert exc.value.question_ids == ["bad1"]


def test_dataset_parse_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("[{")
    with pytest.raises(ParseError):
        load_dataset(path)


def test_manifest_consistency_flag():
    inconsistent = DatasetManifest(name="x", question_count=10,
                                   style_counts={"MC": 3, "OE": 3, "OEMC": 3})
    assert not inconsistent.consistent


# --- derive_styles -----------------------------------------------------------------


def test_derive_styles_preserves_content():
    base = mc_question("q7", gold="C", style="OEMC")
    variants = derive_styles(base)
    assert variants["MC"].id == "q7#mc" and variants["MC"].style == "MC"
    assert variants["OEMC"].id == "q7#oemc" and variants["OEMC"].style == "OEMC"
    for v in variants.values():
        assert v.options == base.options and v.gold == base.gold


def test_derive_styles_requires_options_and_gold():
    with pytest.raises(MissingOptions):
        derive_styles(Question(id="oe", style="OE", prompt="p", gold="x"))
    with pytest.raises(MissingGold):
        derive_styles(Question(id="m", style="MC", prompt="p",
                               options=("a", "b", "c", "d")))


# --- permutation --------------------------------------------------------------------


def test_default_permutation_is_bdac():
    q = mc_question(gold="A")
    permuted = permute_options(q, DEFAULT_PERMUTATION)
    # [A, B, C, D] option texts become [B, D, A, C]
    assert permuted.options == ("opt b", "opt d", "opt a", "opt c")
    # gold text is unchanged; A's text now sits at label C
    assert permuted.gold == "C"
    assert permuted.gold_text() == q.gold_text() == "opt a"


def test_identity_permutation_is_noop():
    q = mc_question(gold="B")
    assert permute_options(q, PermutationSpec.identity()) == q


def test_permute_then_inverse_is_identity():
    rng = random.Random(41)
    for _ in range(100):
        q = random_mc(rng, "q")
        spec = random_bijection(rng)
        assert permute_options(permute_options(q, spec), spec.inverse()) == q


def test_permute_oe_is_style_error():
    with pytest.raises(StyleError):
        permute_options(Question(id="oe", style="OE", prompt="p", gold="t"),
                        DEFAULT_PERMUTATION)


def test_scoring_invariant_under_coordinated_permutation():
    rng = random.Random(43)
    questions = [random_mc(rng, f"q{i}") for i in range(50)]
    predictions = {q.id: rng.choice(LABELS + (None,)) for q in questions}
    base = score(predictions, questions)
    for _ in range(10):
        spec = random_bijection(rng)
        permuted_questions = [permute_options(q, spec) for q in questions]
        remapped = {qid: remap_prediction(a, spec) for qid, a in predictions.items()}
        permuted_score = score(remapped, permuted_questions)
        assert permuted_score.accuracy == base.accuracy
        assert permuted_score.unparseable == base.unparseable


# --- scoring -------------------------------------------------------------------------


def test_score_all_correct_and_half_correct():
    questions = [mc_question(f"q{i}", gold="B") for i in range(10)]
    assert score({q.id: "B" for q in questions}, questions).accuracy == 1.0
    half = {q.id: ("B" if i < 5 else "C") for i, q in enumerate(questions)}
    assert score(half, questions).accuracy == 0.5


def test_score_unparseable_counts_incorrect():
    questions = [mc_question("q1", gold="A"), mc_question("q2", gold="B")]
    result = score({"q1": None, "q2": "B"}, questions)
    assert result.accuracy == 0.5
    assert result.unparseable == 1


def test_score_oe_normalized_exact_match():
    q = Question(id="oe", style="OE", prompt="p", gold="Warfarin raises bleeding risk.")
    assert score({"oe": "warfarin raises   bleeding risk"}, [q]).accuracy == 1.0
    assert score({"oe": "warfarin lowers risk"}, [q]).accuracy == 0.0
    assert normalize_text("A, B; c!") == "a b c"


def test_score_errors():
    q = mc_question("q1", gold="A")
    with pytest.raises(UnknownQuestionId):
        score({"nope": "A"}, [q])
    with pytest.raises(MissingGold):
        score({}, [mc_question("g", gold=None)])


def test_accuracy_monotonicity():
    rng = random.Random(47)
    questions = [random_mc(rng, f"q{i}") for i in range(20)]
    predictions = {}
    previous = 0.0
    for q in questions[:10]:
        predictions[q.id] = q.gold
        current = score(predictions, questions).accuracy
        assert current >= previous
        previous = current
    for q in questions[10:]:
        predictions[q.id] = next(l for l in LABELS if l != q.gold)
        current = score(predictions, questions).accuracy
        assert current <= previous
        previous = current


# --- retrieval metrics -----------------------------------------------------------------


def test_ranking_metrics_perfect_and_absent():
    perfect = [(["gold", "x", "y"], {"gold"}) for _ in range(4)]
    row = ranking_metrics(perfect, k=10, backend="bm25")
    assert row.recall == 1.0 and row.mrr == 1.0
    absent = [(["x", "y"], {"gold"}) for _ in range(4)]
    row = ranking_metrics(absent, k=10)
    assert row.recall == 0.0 and row.mrr == 0.0


def test_retrieval_recall_from_traces():
    def trace_with_ranking(qid, names):
        t = AgentTrace(session_id=qid, question_id=qid)
        ranked = RankedTools(query="q", entries=tuple((n, 1.0) for n in names),
                             backend="bm25", k=10)
        t.add(RetrievalStep(ranked=ranked), 0.0)
        return t

    traces = [trace_with_ranking("q1", ["gold1", "a"]),
              trace_with_ranking("q2", ["b", "gold2"])]
    row = retrieval_recall_at_k(traces, {"q1": {"gold1"}, "q2": {"gold2"}}, k=10)
    assert row.recall == 1.0
    assert row.mrr == pytest.approx((1.0 + 0.5) / 2)

    with pytest.raises(NoRetrievalSteps):
        retrieval_recall_at_k([AgentTrace(session_id="s", question_id="q")], {}, k=10)


# --- reports ------------------------------------------------------------------------------


def make_row(model="m", setting="agentic", style="MC", accuracy=0.5, n=10):
    return SettingRow(model=model, setting=setting, style=style, permuted=False,
                      n=n, accuracy=accuracy, rel_delta=0.0, unparseable=0)


def test_delta_convention():
    rows = compute_deltas([make_row(setting="rag", accuracy=0.8),
                           make_row(setting="none", accuracy=0.6)])
    assert rows[0].rel_delta == 0.0
    assert rows[1].rel_delta == (0.6 - 0.8) / 0.8
    assert abs(rows[1].rel_delta + 0.25) < 1e-12


def test_delta_single_row_and_all_zero():
    assert compute_deltas([make_row()])[0].rel_delta == 0.0
    rows = compute_deltas([make_row(accuracy=0.0), make_row(accuracy=0.0)])
    assert all(r.rel_delta == 0.0 for r in rows)


def test_best_row_delta_exactly_zero_others_nonpositive():
    rng = random.Random(53)
    for _ in range(50):
        rows = compute_deltas([make_row(setting=f"s{i}", accuracy=rng.random())
                               for i in range(6)])
        best = max(r.accuracy for r in rows)
        for r in rows:
            if r.accuracy == best:
                assert r.rel_delta == 0.0
            else:
                assert r.rel_delta <= 0.0


def test_emit_and_parse_report_round_trip(tmp_path):
    report = EvalReport(rows=compute_deltas([
        make_row(setting="rag", style="MC", accuracy=0.8),
        make_row(setting="rag", style="OEMC", accuracy=0.7251),
        make_row(setting="none", style="MC", accuracy=1 / 3),
    ]))
    paths = emit_report(report, tmp_path)
    parsed = parse_report(paths["csv"])
    assert parsed == report
    header = paths["csv"].read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)


def test_emit_report_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        emit_report(EvalReport(), tmp_path)


def test_parse_report_missing_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("model,setting\nx,y\n")
    with pytest.raises(SchemaError) as exc:
        parse_report(bad)
    assert "rel_delta" in str(exc.value)
