"""Drug-label clients: DailyMed structured product labels and openFDA fields.

The DailyMed tool returns the complete versioned label narrative in one
call (large payloads by design).  The openFDA tool is deliberately narrow:
one label field per call, so broader therapeutic questions take several
calls.  Both are exposed to the agent as builtin-bound registry tools.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Any

from .errors import NotFound, UnknownField, UpstreamError
from .executor import ExecutionEnv, register_builtin

DAILYMED_BASE = "https://dailymed.nlm.nih.gov/dailymed/services/v2"
OPENFDA_LABEL_URL = "https://api.fda.gov/drug/label.json"
OPENFDA_API_KEY_ENV = "OPENFDA_API_KEY"

# Label fields the narrow openFDA tool may request.
KNOWN_LABEL_FIELDS = (
    "adverse_reactions",
    "boxed_warning",
    "contraindications",
    "dosage_and_administration",
    "drug_interactions",
    "indications_and_usage",
    "use_in_specific_populations",
    "warnings",
    "warnings_and_cautions",
)


@dataclass(frozen=True)
class SplDocument:
    """One structured product label: versioned narrative sections."""

    set_id: str
    version: int
    drug_name: str
    sections: tuple[tuple[str, str], ...]  # (title, narrative text)
    ambiguous_name: bool = False

    def __post_init__(self):
        if not self.set_id:
            raise ValueError("set_id must be non-empty")
        if self.version < 1:
            raise ValueError("version must be >= 1")
        if not self.sections:
            raise ValueError("a label needs at least one section")

    def section_titles(self) -> list[str]:
        return [title for title, _ in self.sections]

    def narrative(self) -> str:
        parts = [f"{self.drug_name} (SPL set {self.set_id}, version {self.version})"]
        for title, text in self.sections:
            parts.append(f"== {title} ==\n{text}")
        return "\n\n".join(parts)


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _element_text(el: ET.Element) -> str:
    return " ".join("".join(el.itertext()).split())


def parse_spl_xml(body: str, fallback_version: int = 1) -> tuple[str, int, str, tuple]:
    """Pull (set_id, version, title, sections) out of an SPL document."""
    try:
        root = ET.fromstring(body)
    except ET.ParseError as e:
        raise UpstreamError(f"unparseable SPL document: {e}") from e

    set_id = ""
    version = fallback_version
    title = ""
    sections: list[tuple[str, str]] = []
    for el in root.iter():
        name = _local(el.tag)
        if name == "setId" and not set_id:
            set_id = el.get("root", "")
        elif name == "versionNumber":
            try:
                version = int(el.get("value", fallback_version))
            except ValueError:
                pass
        elif name == "title" and not title and el is not root:
            title = _element_text(el)
    for el in root.iter():
        if _local(el.tag) != "section":
            continue
        sec_title = ""
        sec_text = ""
        for child in el:
            if _local(child.tag) == "title":
                sec_title = _element_text(child)
            elif _local(child.tag) == "text":
                sec_text = _element_text(child)
        if sec_title or sec_text:
            sections.append((sec_title or "UNTITLED", sec_text))
    return set_id, version, title, tuple(sections)


def dailymed_lookup(env: ExecutionEnv, drug_name: str) -> SplDocument:
    """Resolve a drug name to its most recent structured product label.

    Two phases: the name lists candidate labels, then the chosen set id
    fetches the document.  Selection: highest version among exact-name
    matches; otherwise the first listing entry.  Multiple candidates set
    the ambiguity flag instead of failing.
    """
    if not drug_name.strip():
        raise ValueError("drug_name must be non-empty")

    body, _ = env.fetch("GET", f"{DAILYMED_BASE}/spls.json",
                        params={"drug_name": drug_name})
    try:
        listing = json.loads(body)
    except json.JSONDecodeError as e:
        raise UpstreamError(f"unparseable listing: {e}") from e
    entries = listing.get("data") or []
    if not entries:
        raise NotFound(f"no label found for drug {drug_name!r}")

    wanted = drug_name.strip().lower()
    exact = [e for e in entries
             if str(e.get("title", "")).lower() == wanted
             or str(e.get("title", "")).lower().startswith(wanted + " ")]
    pool = exact if exact else entries[:1]
    chosen = max(pool, key=lambda e: int(e.get("spl_version", 0)))
    ambiguous = len(exact) > 1 or (not exact and len(entries) > 1)

    set_id = str(chosen.get("setid", ""))
    if not set_id:
        raise UpstreamError("listing entry without a set id")
    spl_body, _ = env.fetch("GET", f"{DAILYMED_BASE}/spls/{set_id}.xml")
    parsed_set_id, version, title, sections = parse_spl_xml(
        spl_body, fallback_version=int(chosen.get("spl_version", 1)))
    return SplDocument(
        set_id=parsed_set_id or set_id,
        version=version,
        drug_name=title or str(chosen.get("title", drug_name)),
        sections=sections,
        ambiguous_name=ambiguous,
    )


def openfda_label_field(env: ExecutionEnv, search: str, field: str) -> str:
    """Fetch exactly one label field for a search query; narrow on purpose."""
    if field not in KNOWN_LABEL_FIELDS:
        raise UnknownField(f"unknown label field {field!r}")
    params: dict[str, Any] = {"search": search, "limit": 1}
    import os

    if os.environ.get(OPENFDA_API_KEY_ENV):
        params["api_key"] = os.environ[OPENFDA_API_KEY_ENV]
    try:
        body, _ = env.fetch("GET", OPENFDA_LABEL_URL, params=params)
    except UpstreamError as e:
        if "404" in str(e):
            raise NotFound(f"no label matches {search!r}") from e
        raise
    try:
        document = json.loads(body)
    except json.JSONDecodeError as e:
        raise UpstreamError(f"unparseable openFDA response: {e}") from e
    results = document.get("results") or []
    if not results:
        raise NotFound(f"no label matches {search!r}")
    value = results[0].get(field)
    if value is None:
        raise NotFound(f"label has no {field!r} content")
    if isinstance(value, list):
        return "\n".join(str(v) for v in value)
    return str(value)


# --- builtin bindings ------------------------------------------------------------

def _dailymed_handler(env: ExecutionEnv, args: dict[str, Any]) -> str:
    return dailymed_lookup(env, args["drug_name"]).narrative()


def _openfda_handler(env: ExecutionEnv, args: dict[str, Any]) -> str:
    return openfda_label_field(env, args["search"], args["field"])


register_builtin("dailymed_lookup", _dailymed_handler)
register_builtin("openfda_label_field", _openfda_handler)
