import math
import random

import pytest

from oracles import (
    oracle_bm25_ranking,
    oracle_bm25_score,
    oracle_cosine,
    oracle_cosine_ranking,
)
from toolloop.errors import (
    BackendUnavailable,
    DimensionMismatch,
    EmptyCorpus,
    UnknownTool,
    ZeroVector,
)
from toolloop.registry import Binding, ParamSpec, Registry, ToolSpec, register_tool
from toolloop.retrieval import (
    Bm25Index,
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    RetrievalConfig,
    build_backend,
    build_bm25_index,
    bm25_score,
    cosine_similarity,
    retrieve_top_k,
    tokenize,
)

_WORDS = (
    "drug label warning dose renal hepatic trial section interaction kinase "
    "receptor therapy infusion tablet capsule plasma clearance export summary "
    "ontology marker panel cohort outcome adverse serious chronic acute"
).split()


def registry_from(descriptions: dict[str, str]) -> Registry:
    r = Registry()
    for name, desc in descriptions.items():
        r = register_tool(r, ToolSpec(
            name=name, description=desc,
            params=(ParamSpec(name="q", kind="string"),),
            binding=Binding(type="builtin", handler="echo"),
        ))
    return r


def random_corpus(rng: random.Random, max_docs: int = 50) -> dict[str, str]:
    n = rng.randint(2, max_docs)
    corpus = {}
    for i in range(n):
        sentences = []
        for _ in range(rng.randint(1, 2)):
            words = rng.choices(_WORDS, k=rng.randint(3, 9))
            sentences.append(" ".join(words).capitalize() + ".")
        corpus[f"tool_{i:03d}"] = " ".join(sentences)
    return corpus


def random_query(rng: random.Random) -> str:
    return " ".join(rng.choices(_WORDS, k=rng.randint(1, 5)))


def test_tokenize_convention():
    assert tokenize("Returns drug warnings.") == ["returns", "drug", "warnings"]
    assert tokenize("INR>4.0, stop-dosing!") == ["inr", "4", "0", "stop", "dosing"]
    assert tokenize("___") == []


def test_index_over_fixture_registry(fixture_registry):
    index = build_bm25_index(fixture_registry)
    assert index.size == 12
    assert index.revision == fixture_registry.version


def test_single_document_average_length():
    r = registry_from({"t": "Returns drug warnings."})
    index = build_bm25_index(r)
    assert index.avgdl == index.doc_lens[0] == 3


def test_empty_registry_is_empty_corpus():
    with pytest.raises(EmptyCorpus):
        build_bm25_index(Registry())


def test_bm25_no_overlap_scores_zero():
    r = registry_from({"t": "Returns drug warnings."})
    index = build_bm25_index(r)
    assert bm25_score(index, "ontology parents", "t") == 0.0


def test_bm25_unknown_tool():
    r = registry_from({"t": "Returns drug warnings."})
    index = build_bm25_index(r)
    with pytest.raises(UnknownTool):
        bm25_score(index, "drug", "nope")


def test_bm25_single_doc_frozen_value():
    # one document, dl == avgdl: score = 2 * ln(1 + 0.5/1.5) exactly
    r = registry_from({"t": "Returns drug warnings."})
    index = build_bm25_index(r)
    got = bm25_score(index, "drug warnings", "t")
    assert abs(got - 0.5753641449035618) < 1e-9
    assert abs(got - 2 * math.log(4 / 3)) < 1e-12
    assert abs(got - oracle_bm25_score(["Returns drug warnings."], 0, "drug warnings")) < 1e-12


def test_bm25_duplicated_query_term_scores_at_least_single():
    rng = random.Random(11)
    for _ in range(25):
        corpus = random_corpus(rng, max_docs=10)
        r = registry_from(corpus)
        index = build_bm25_index(r)
        name = rng.choice(list(corpus))
        term = rng.choice(tokenize(corpus[name]) or ["drug"])
        single = bm25_score(index, term, name)
        doubled = bm25_score(index, f"{term} {term}", name)
        assert doubled >= single
        if single > 0:
            assert doubled > single  # multiplicity counts


def test_bm25_oracle_equivalence_small():
    rng = random.Random(3)
    for _ in range(30):
        corpus = random_corpus(rng, max_docs=12)
        names = list(corpus)
        docs = [corpus[n] for n in names]
        index = build_bm25_index(registry_from(corpus))
        for _ in range(3):
            query = random_query(rng)
            for i, name in enumerate(names):
                assert abs(bm25_score(index, query, name)
                           - oracle_bm25_score(docs, i, query)) < 1e-9


def test_adding_tool_changes_scores_only_like_the_oracle():
    rng = random.Random(5)
    corpus = random_corpus(rng, max_docs=8)
    query = random_query(rng)
    extended = dict(corpus)
    extended["tool_zzz"] = "Completely fresh drug export summary."
    index = build_bm25_index(registry_from(extended))
    names = list(extended)
    docs = [extended[n] for n in names]
    engine = [(n, bm25_score(index, query, n)) for n in names]
    engine.sort(key=lambda e: (-e[1], e[0]))
    assert engine == [(n, pytest.approx(s, abs=1e-9))
                      for n, s in oracle_bm25_ranking(names, docs, query)]


# --- cosine and providers ----------------------------------------------------------


def test_cosine_identity_and_orthogonal():
    assert cosine_similarity([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0)
    assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0


def test_cosine_matches_direct_formula():
    rng = random.Random(17)
    for _ in range(50):
        u = [rng.uniform(-1, 1) for _ in range(8)]
        v = [rng.uniform(-1, 1) for _ in range(8)]
        assert abs(cosine_similarity(u, v) - oracle_cosine(u, v)) < 1e-12


def test_cosine_errors():
    with pytest.raises(DimensionMismatch):
        cosine_similarity([1.0], [1.0, 2.0])
    with pytest.raises(ZeroVector):
        cosine_similarity([0.0, 0.0], [1.0, 2.0])


def test_hash_provider_determinism_and_norm():
    provider = HashEmbeddingProvider(64)
    assert provider.embed("drug warnings") == provider.embed("drug warnings")
    rng = random.Random(23)
    for _ in range(40):
        text = " ".join(rng.choices(_WORDS, k=rng.randint(1, 12)))
        norm = math.sqrt(sum(x * x for x in provider.embed(text)))
        assert abs(norm - 1.0) < 1e-9


def test_hash_provider_minimum_dimension():
    with pytest.raises(ValueError):
        HashEmbeddingProvider(4)


def test_empty_text_embeds_to_zero_vector_and_errors_at_cosine():
    provider = HashEmbeddingProvider(16)
    zero = provider.embed("")
    assert not any(zero)
    with pytest.raises(ZeroVector):
        cosine_similarity(zero, provider.embed("drug"))


def test_http_provider_contract():
    seen = {}

    def fake_post(url, payload):
        seen["url"], seen["payload"] = url, payload
        return {"vectors": [[0.6, 0.8]]}

    provider = HttpEmbeddingProvider("http://embed.example/v1", 2, post=fake_post)
    assert provider.embed("drug") == [0.6, 0.8]
    assert seen["payload"] == {"texts": ["drug"]}
    with pytest.raises(DimensionMismatch):
        HttpEmbeddingProvider("http://embed.example/v1", 3, post=fake_post).embed("x")


# --- top-k contract ------------------------------------------------------------------


def test_top_k_default_is_ten_on_twelve_tool_corpus(fixture_registry):
    config = RetrievalConfig()
    state = build_backend(fixture_registry, config)
    ranked = retrieve_top_k(state, "drug label warnings", config)
    assert config.k == 10
    assert len(ranked.entries) == 10


def test_top_k_exceeding_corpus_returns_corpus():
    r = registry_from({f"t{i}": f"Drug topic {i} summary." for i in range(4)})
    config = RetrievalConfig(k=10)
    ranked = retrieve_top_k(build_backend(r, config), "drug", config)
    assert len(ranked.entries) == 4


def test_tie_break_by_ascending_name():
    r = registry_from({
        "zeta_tool": "Returns drug warnings.",
        "alpha_tool": "Returns drug warnings.",
        "mid_tool": "Totally unrelated ontology summary.",
    })
    config = RetrievalConfig(k=10)
    ranked = retrieve_top_k(build_backend(r, config), "drug warnings", config)
    assert ranked.names()[:2] == ["alpha_tool", "zeta_tool"]


def test_none_backend_returns_empty():
    r = registry_from({"t": "Returns drug warnings."})
    config = RetrievalConfig(backend="none")
    ranked = retrieve_top_k(build_backend(r, config), "drug", config)
    assert ranked.entries == ()
    assert ranked.backend == "none"


def test_prefix_property_extending_k_never_reorders():
    rng = random.Random(29)
    for _ in range(10):
        corpus = random_corpus(rng, max_docs=20)
        r = registry_from(corpus)
        query = random_query(rng)
        for backend in ("bm25", "dense"):
            small = RetrievalConfig(backend=backend, k=3)
            big = RetrievalConfig(backend=backend, k=9)
            state = build_backend(r, small)
            first = retrieve_top_k(state, query, small).entries
            wider = retrieve_top_k(state, query, big).entries
            assert wider[:len(first)] == first


def test_dense_ranks_full_token_overlap_above_none():
    rng = random.Random(31)
    provider = HashEmbeddingProvider(256)
    for _ in range(25):
        query_words = rng.sample(_WORDS, 3)
        other_words = [w for w in _WORDS if w not in query_words]
        corpus = {
            "with_all": " ".join(query_words).capitalize() + " digest overview.",
            "with_none": " ".join(rng.sample(other_words, 5)).capitalize() + ".",
        }
        r = registry_from(corpus)
        config = RetrievalConfig(backend="dense", k=2)
        state = build_backend(r, config, provider)
        ranked = retrieve_top_k(state, " ".join(query_words), config)
        assert ranked.names()[0] == "with_all"


def test_dense_scores_match_cosine_oracle(fixture_registry):
    provider = HashEmbeddingProvider(128)
    config = RetrievalConfig(backend="dense", k=12)
    state = build_backend(fixture_registry, config, provider)
    query = "structured product label narrative"
    ranked = retrieve_top_k(state, query, config)
    names = [n for n, _ in fixture_registry.corpus()]
    doc_vectors = [provider.embed(d) for _, d in fixture_registry.corpus()]
    expected = oracle_cosine_ranking(names, doc_vectors, provider.embed(query))
    assert [n for n, _ in ranked.entries] == [n for n, _ in expected]
    for (_, got), (_, want) in zip(ranked.entries, expected):
        assert abs(got - want) < 1e-12


def test_dense_zero_query_surfaces_backend_unavailable():
    r = registry_from({"t": "Returns drug warnings."})
    config = RetrievalConfig(backend="dense", k=1)
    state = build_backend(r, config)
    with pytest.raises(BackendUnavailable) as exc:
        retrieve_top_k(state, "???", config)
    assert isinstance(exc.value.cause, ZeroVector)


def test_provider_failure_becomes_backend_unavailable():
    class FailingProvider:
        id = "failing"
        dimension = 8

        def embed(self, text):
            raise RuntimeError("endpoint down")

    r = registry_from({"t": "Returns drug warnings."})
    with pytest.raises(BackendUnavailable):
        build_backend(r, RetrievalConfig(backend="dense"), FailingProvider())


def test_config_validation():
    with pytest.raises(ValueError):
        RetrievalConfig(k=0)
    with pytest.raises(ValueError):
        RetrievalConfig(bm25_b=1.5)
    with pytest.raises(ValueError):
        RetrievalConfig(bm25_k1=-0.1)


def test_retrieve_deterministic_across_runs(fixture_registry):
    config = RetrievalConfig()
    a = retrieve_top_k(build_backend(fixture_registry, config), "drug warnings", config)
    b = retrieve_top_k(build_backend(fixture_registry, config), "drug warnings", config)
    assert a == b
