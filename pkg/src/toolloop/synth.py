"""Seeded synthetic data: benchmark datasets and annotated tool corpora.

The dataset shapes reproduce the published benchmark splits so manifest
checks work without any proprietary data.  The corpus generators build
lexically controlled registries with gold-tool annotations for the
retriever comparison: one where queries share their distinctive tokens
with the gold description, and one where the gold description is a short
paraphrase sharing a single common token while decoy tools soak up the
rare query token.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .bench import DatasetManifest, Question
from .registry import Binding, ParamSpec, Registry, ToolSpec, register_tool


@dataclass(frozen=True)
class DatasetShape:
    """Declared split sizes: total plus per-style counts."""

    total: int
    mc: int
    oemc: int
    oe: int

    def declared_manifest(self, name: str) -> DatasetManifest:
        return DatasetManifest(
            name=name,
            question_count=self.total,
            style_counts={"MC": self.mc, "OE": self.oe, "OEMC": self.oemc},
        )


# Published split sizes.  The test1 row is internally inconsistent upstream
# (663 + 1274 + 142 = 2079, not 2097); the declared manifest reproduces the
# published numbers and carries consistent=False, while the generated data
# honors the per-style counts.
DATASET_SHAPES = {
    "validation": DatasetShape(total=459, mc=183, oemc=230, oe=46),
    "test1": DatasetShape(total=2097, mc=663, oemc=1274, oe=142),
    "test2": DatasetShape(total=2491, mc=779, oemc=1474, oe=238),
    "tiny": DatasetShape(total=20, mc=8, oemc=8, oe=4),
}

_DRUGS = (
    "warfarin", "metformin", "lisinopril", "atorvastatin", "amoxicillin",
    "ibuprofen", "sertraline", "levothyroxine", "omeprazole", "gabapentin",
    "apixaban", "prednisone", "clopidogrel", "furosemide", "amlodipine",
)
_TOPICS = (
    "boxed warnings", "drug interactions", "use during pregnancy",
    "renal dose adjustment", "common adverse reactions", "contraindications",
    "monitoring requirements", "overdose management", "pediatric use",
    "hepatic impairment dosing",
)
_CLAIMS = (
    "requires periodic liver function monitoring",
    "is contraindicated with concurrent NSAID use",
    "needs dose reduction when creatinine clearance falls",
    "carries a boxed warning for serious bleeding",
    "commonly causes gastrointestinal upset",
    "should be taken on an empty stomach",
    "interacts with grapefruit juice",
    "requires gradual tapering on discontinuation",
    "is avoided in the third trimester",
    "may prolong the QT interval",
)


def _make_question(rng: random.Random, qid: str, style: str, index: int) -> Question:
    drug = _DRUGS[index % len(_DRUGS)]
    topic = _TOPICS[index % len(_TOPICS)]
    prompt = f"What does the label of {drug} state about {topic}?"
    if style == "OE":
        claim = rng.choice(_CLAIMS)
        return Question(id=qid, style="OE", prompt=prompt, gold=f"{drug} {claim}")
    claims = rng.sample(_CLAIMS, 4)
    gold = rng.choice("ABCD")
    return Question(
        id=qid,
        style=style,
        prompt=prompt,
        options=tuple(f"{drug} {c}" for c in claims),
        gold=gold,
    )


def gen_dataset(shape_name: str, seed: int = 0) -> tuple[DatasetManifest, list[Question]]:
    """Generate a dataset with the named shape's per-style counts.

    Returns the declared manifest (the published tuple) along with the
    questions; a manifest computed from the data always satisfies the sum
    invariant and matches the declared one wherever the published numbers
    are self-consistent.
    """
    if shape_name not in DATASET_SHAPES:
        raise KeyError(f"unknown dataset shape {shape_name!r}; "
                       f"choose from {sorted(DATASET_SHAPES)}")
    shape = DATASET_SHAPES[shape_name]
    rng = random.Random(seed)
    questions: list[Question] = []
    index = 0
    for style, count in (("MC", shape.mc), ("OEMC", shape.oemc), ("OE", shape.oe)):
        for _ in range(count):
            qid = f"{shape_name}-{index:04d}"
            questions.append(_make_question(rng, qid, style, index))
            index += 1
    return shape.declared_manifest(shape_name), questions


# --- annotated retrieval corpora ----------------------------------------------

_FILLER_WORDS = tuple(
    f"{stem}{i:02d}" for stem in ("node", "grain", "brook", "ridge", "crest", "vale")
    for i in range(10)
)


def _tool(name: str, description: str) -> ToolSpec:
    return ToolSpec(
        name=name,
        description=description,
        params=(ParamSpec(name="query", kind="string", required=False,
                          description="free-text lookup"),),
        binding=Binding(type="builtin", handler="echo"),
    )


def gen_corpus(kind: str, n_questions: int = 10, seed: int = 0,
               traps_per_question: int = 10) -> tuple[Registry, list[dict]]:
    """Build an annotated (registry, queries) pair for retriever comparison.

    kind "exact": each query repeats three distinctive tokens from its gold
    tool's description, so exact-match ranking puts the gold tool first.

    kind "paraphrase": the gold description shares exactly one token with
    the query, a common word present in every description; decoy tools
    carry the rare query token inside longer descriptions.  Term-frequency
    weighting chases the decoys while length-normalized similarity over
    short descriptions keeps the gold tools on top.
    """
    rng = random.Random(seed)
    registry = Registry()
    queries: list[dict] = []

    if kind == "exact":
        for i in range(n_questions):
            t1, t2, t3 = f"alpha{i:02d}", f"beta{i:02d}", f"gamma{i:02d}"
            name = f"exact_gold_{i:02d}"
            registry = register_tool(registry, _tool(
                name, f"Retrieves {t1} {t2} {t3} entries for clinical review."))
            queries.append({"id": f"exq-{i:02d}", "query": f"{t1} {t2} {t3}",
                            "gold_tools": [name]})
        for j in range(5):
            registry = register_tool(registry, _tool(
                f"exact_filler_{j:02d}",
                f"Summarizes zeta{j:02d} eta{j:02d} theta{j:02d} material briefly."))
        return registry, queries

    if kind == "paraphrase":
        common = "records"
        for i in range(n_questions):
            rare = f"topic{i:02d}"
            gold_name = f"para_gold_{i:02d}"
            registry = register_tool(registry, _tool(
                gold_name, f"{common.capitalize()} digest{i:02d}."))
            for j in range(traps_per_question):
                fillers = " ".join(rng.sample(_FILLER_WORDS, 8))
                registry = register_tool(registry, _tool(
                    f"para_trap_{i:02d}_{j:02d}", f"{common} {rare} {fillers}."))
            queries.append({"id": f"paq-{i:02d}", "query": f"{common} {rare}",
                            "gold_tools": [gold_name]})
        return registry, queries

    raise KeyError(f"unknown corpus kind {kind!r}; choose 'exact' or 'paraphrase'")


def write_corpus(registry: Registry, queries: list[dict], out_dir: str | Path) -> dict[str, Path]:
    from .registry import dump_registry

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    registry_path = out / "registry.json"
    registry_path.write_text(dump_registry(registry), encoding="utf-8")
    queries_path = out / "queries.json"
    queries_path.write_text(json.dumps(queries, indent=2), encoding="utf-8")
    return {"registry": registry_path, "queries": queries_path}
