"""Ranking tool descriptions against a query: Okapi BM25 and dense cosine.

The corpus is the registry's description text (not tool names).  Scoring is
deterministic: ties are always broken by ascending tool name so runs are
bit-reproducible.  Indexes are immutable after build and safe to share.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from .errors import (
    BackendUnavailable,
    DimensionMismatch,
    EmptyCorpus,
    UnknownBackend,
    UnknownTool,
    ZeroVector,
)
from .registry import Registry

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop empties. No stemming."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


@dataclass(frozen=True)
class RetrievalConfig:
    """Backend choice plus BM25 parameters; k defaults to 10."""

    backend: str = "bm25"  # bm25 | dense | none
    k: int = 10
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    provider: str = "hash"  # dense backends: embedding provider id
    dimension: int = 256    # hash provider bucket count

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.bm25_k1 < 0:
            raise ValueError("bm25_k1 must be >= 0")
        if not 0 <= self.bm25_b <= 1:
            raise ValueError("bm25_b must be in [0, 1]")


@dataclass(frozen=True)
class RankedTools:
    """Top-k retrieval result: entries sorted by score desc, name asc."""

    query: str
    entries: tuple[tuple[str, float], ...]
    backend: str
    k: int

    def names(self) -> list[str]:
        return [name for name, _ in self.entries]


# --- sparse (Okapi BM25) ------------------------------------------------------

@dataclass(frozen=True)
class Bm25Index:
    """Inverted statistics over the description corpus of one registry revision."""

    revision: int
    names: tuple[str, ...]
    term_freqs: tuple[dict[str, int], ...]
    doc_lens: tuple[int, ...]
    avgdl: float
    df: dict[str, int]
    k1: float
    b: float

    @property
    def size(self) -> int:
        return len(self.names)


def build_bm25_index(registry: Registry, config: RetrievalConfig | None = None) -> Bm25Index:
    config = config or RetrievalConfig()
    corpus = registry.corpus()
    if not corpus:
        raise EmptyCorpus("registry has no tools to index")
    names = tuple(name for name, _ in corpus)
    docs = [tokenize(desc) for _, desc in corpus]
    term_freqs = tuple(dict(Counter(d)) for d in docs)
    doc_lens = tuple(len(d) for d in docs)
    df: Counter = Counter()
    for tf in term_freqs:
        df.update(tf.keys())
    return Bm25Index(
        revision=registry.version,
        names=names,
        term_freqs=term_freqs,
        doc_lens=doc_lens,
        avgdl=sum(doc_lens) / len(doc_lens),
        df=dict(df),
        k1=config.bm25_k1,
        b=config.bm25_b,
    )


def bm25_score(index: Bm25Index, query: str, tool_name: str) -> float:
    """Okapi BM25 with idf = ln(1 + (N - df + 0.5) / (df + 0.5)).

    Query terms are scored with multiplicity; terms absent from the
    document contribute 0.
    """
    try:
        i = index.names.index(tool_name)
    except ValueError:
        raise UnknownTool(f"tool {tool_name!r} not in index") from None
    tf = index.term_freqs[i]
    dl = index.doc_lens[i]
    n = index.size
    norm = index.k1 * (1 - index.b + index.b * dl / index.avgdl)
    score = 0.0
    for term in tokenize(query):
        f = tf.get(term)
        if not f:
            continue
        idf = math.log(1 + (n - index.df[term] + 0.5) / (index.df[term] + 0.5))
        score += idf * f * (index.k1 + 1) / (f + norm)
    return score


# --- dense (cosine over embeddings) -------------------------------------------

def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    """dot(u, v) / (|u| * |v|); errors on mismatched or all-zero vectors."""
    if len(u) != len(v):
        raise DimensionMismatch(f"dimensions differ: {len(u)} vs {len(v)}")
    dot = nu = nv = 0.0
    for a, b in zip(u, v):
        dot += a * b
        nu += a * a
        nv += b * b
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine similarity is undefined for an all-zero vector")
    return dot / math.sqrt(nu * nv)


class EmbeddingProvider(Protocol):
    """Deterministic text embedding: same text gives the identical vector."""

    dimension: int

    def embed(self, text: str) -> list[float]: ...


class HashEmbeddingProvider:
    """Stand-in for dense models: hash tokens into buckets, L2 normalize.

    Texts sharing more tokens get higher cosine similarity in expectation,
    which is enough to exercise the dense retrieval path deterministically.
    """

    id = "hash"

    def __init__(self, dimension: int = 256):
        if dimension < 8:
            raise ValueError("dimension must be >= 8")
        self.dimension = dimension

    def _bucket(self, token: str) -> int:
        digest = hashlib.md5(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % self.dimension

    def embed(self, text: str) -> list[float]:
        vec = [0.0] * self.dimension
        for token in tokenize(text):
            vec[self._bucket(token)] += 1.0
        norm = math.sqrt(sum(x * x for x in vec))
        if norm == 0.0:
            return vec  # zero vector; surfaced as ZeroVector at cosine time
        return [x / norm for x in vec]


class HttpEmbeddingProvider:
    """Remote embedding endpoint: POST {texts: [...]} -> {vectors: [[...]]}."""

    id = "http"

    def __init__(self, url: str, dimension: int,
                 post: Callable[[str, dict], dict] | None = None):
        self.url = url
        self.dimension = dimension
        if post is None:
            import requests

            def post(url: str, payload: dict) -> dict:
                resp = requests.post(url, json=payload, timeout=30)
                resp.raise_for_status()
                return resp.json()

        self._post = post

    def embed(self, text: str) -> list[float]:
        body = self._post(self.url, {"texts": [text]})
        vec = body["vectors"][0]
        if len(vec) != self.dimension:
            raise DimensionMismatch(
                f"provider returned dimension {len(vec)}, expected {self.dimension}"
            )
        return [float(x) for x in vec]


@dataclass(frozen=True)
class DenseIndex:
    """Precomputed description embeddings; the query embeds per call."""

    revision: int
    names: tuple[str, ...]
    vectors: tuple[tuple[float, ...], ...]
    provider: EmbeddingProvider = field(repr=False, compare=False, default=None)


@dataclass(frozen=True)
class NoneBackend:
    """Retrieval disabled: always returns an empty ranking."""

    revision: int = 0


BackendState = Bm25Index | DenseIndex | NoneBackend


def build_dense_index(registry: Registry, provider: EmbeddingProvider) -> DenseIndex:
    corpus = registry.corpus()
    if not corpus:
        raise EmptyCorpus("registry has no tools to index")
    try:
        vectors = tuple(tuple(provider.embed(desc)) for _, desc in corpus)
    except Exception as e:
        raise BackendUnavailable(f"embedding provider failed: {e}", cause=e) from e
    return DenseIndex(
        revision=registry.version,
        names=tuple(name for name, _ in corpus),
        vectors=vectors,
        provider=provider,
    )


def build_backend(registry: Registry, config: RetrievalConfig,
                  provider: EmbeddingProvider | None = None) -> BackendState:
    if config.backend == "bm25":
        return build_bm25_index(registry, config)
    if config.backend == "dense":
        return build_dense_index(registry, provider or HashEmbeddingProvider(config.dimension))
    if config.backend == "none":
        return NoneBackend(revision=registry.version)
    raise UnknownBackend(f"unknown retrieval backend {config.backend!r}")


def _ranked(query: str, scored: list[tuple[str, float]], backend: str, k: int) -> RankedTools:
    scored.sort(key=lambda e: (-e[1], e[0]))
    return RankedTools(query=query, entries=tuple(scored[:k]), backend=backend, k=k)


def retrieve_top_k(state: BackendState, query: str, config: RetrievalConfig) -> RankedTools:
    """Rank the whole corpus and keep the top k=config.k entries.

    The result is a prefix of the full ranking: extending k never reorders
    earlier entries.  All scores are finite.
    """
    k = config.k
    if isinstance(state, NoneBackend):
        return RankedTools(query=query, entries=(), backend="none", k=k)
    if isinstance(state, Bm25Index):
        scored = [(name, bm25_score(state, query, name)) for name in state.names]
        return _ranked(query, scored, "bm25", k)
    if isinstance(state, DenseIndex):
        try:
            qvec = state.provider.embed(query)
        except Exception as e:
            raise BackendUnavailable(f"embedding provider failed: {e}", cause=e) from e
        if not any(qvec):
            raise BackendUnavailable(
                "query embedded to the zero vector",
                cause=ZeroVector("query embedding is all-zero"),
            )
        scored = []
        for name, dvec in zip(state.names, state.vectors):
            # Token-free descriptions embed to zero; score them 0 instead of
            # erroring so the ranking stays total.
            score = 0.0 if not any(dvec) else cosine_similarity(qvec, dvec)
            scored.append((name, score))
        provider_id = getattr(state.provider, "id", type(state.provider).__name__)
        return _ranked(query, scored, f"dense-{provider_id}", k)
    raise UnknownBackend(f"unsupported backend state {type(state).__name__}")
