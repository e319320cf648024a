"""Tool registry: described, schema-validated callable tools.

A registry revision is immutable; registering a tool produces a new revision
with an incremented version counter.  The description corpus used by the
retrievers is always derived from the registry, never stored separately.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Iterable

from .calls import FunctionCall, call_fingerprint
from .errors import (
    CallValidationError,
    DuplicateName,
    InvalidSpec,
    ParseError,
    Violation,
)

logger = logging.getLogger(__name__)

PARAM_KINDS = ("string", "integer", "number", "boolean", "enum")
BINDING_TYPES = ("builtin", "http", "fixture")

_SENTENCE_SPLIT = re.compile(r"[.?!](?:\s+|$)")


def sentence_count(text: str) -> int:
    """Count sentences by '.', '?', '!' followed by whitespace or end."""
    return len([s for s in _SENTENCE_SPLIT.split(text) if s.strip()])


@dataclass(frozen=True)
class ParamSpec:
    """Schema for one tool parameter."""

    name: str
    kind: str
    required: bool = False
    description: str = ""
    values: tuple[str, ...] = ()  # enum kinds only

    def problems(self) -> list[str]:
        out = []
        if not self.name:
            out.append("parameter name is empty")
        if self.kind not in PARAM_KINDS:
            out.append(f"parameter {self.name!r} has unknown kind {self.kind!r}")
        if self.kind == "enum" and not self.values:
            out.append(f"enum parameter {self.name!r} has no values")
        return out

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "name": self.name,
            "kind": self.kind,
            "required": self.required,
            "description": self.description,
        }
        if self.values:
            d["values"] = list(self.values)
        return d


@dataclass(frozen=True)
class Binding:
    """Execution binding: builtin handler, HTTP endpoint, or static fixture."""

    type: str
    handler: str = ""        # builtin
    url_template: str = ""   # http, with {param} placeholders
    method: str = "GET"      # http
    extract: str = ""        # http: path expression into the JSON payload
    file_id: str = ""        # fixture

    def problems(self) -> list[str]:
        out = []
        if self.type not in BINDING_TYPES:
            out.append(f"unknown binding type {self.type!r}")
        elif self.type == "builtin" and not self.handler:
            out.append("builtin binding missing handler id")
        elif self.type == "http" and not self.url_template:
            out.append("http binding missing url_template")
        elif self.type == "fixture" and not self.file_id:
            out.append("fixture binding missing file id")
        return out

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"type": self.type}
        if self.type == "builtin":
            d["handler"] = self.handler
        elif self.type == "http":
            d.update(url_template=self.url_template, method=self.method, extract=self.extract)
        elif self.type == "fixture":
            d["file_id"] = self.file_id
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Binding":
        return cls(
            type=d.get("type", ""),
            handler=d.get("handler", ""),
            url_template=d.get("url_template", ""),
            method=d.get("method", "GET"),
            extract=d.get("extract", ""),
            file_id=d.get("file_id", ""),
        )


@dataclass(frozen=True)
class ToolSpec:
    """A registered tool: unique name, 1-2 sentence description, params, binding."""

    name: str
    description: str
    params: tuple[ParamSpec, ...] = ()
    binding: Binding = field(default_factory=lambda: Binding(type="builtin", handler="echo"))

    def problems(self) -> list[str]:
        out = []
        if not self.name:
            out.append("tool name is empty")
        if not self.description.strip():
            out.append(f"tool {self.name!r} has an empty description")
        seen = set()
        for p in self.params:
            if p.name in seen:
                out.append(f"tool {self.name!r} declares parameter {p.name!r} twice")
            seen.add(p.name)
            out.extend(p.problems())
        out.extend(self.binding.problems())
        return out

    def lint_warnings(self) -> list[str]:
        # Brevity is treated as a lint, not a hard constraint.
        n = sentence_count(self.description)
        if n > 2:
            return [f"tool {self.name!r}: description has {n} sentences (expected at most 2)"]
        return []

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "params": [p.to_dict() for p in self.params],
            "binding": self.binding.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ToolSpec":
        params = tuple(
            ParamSpec(
                name=p.get("name", ""),
                kind=p.get("kind", ""),
                required=bool(p.get("required", False)),
                description=p.get("description", ""),
                values=tuple(p.get("values", [])),
            )
            for p in d.get("params", [])
        )
        return cls(
            name=d.get("name", ""),
            description=d.get("description", ""),
            params=params,
            binding=Binding.from_dict(d.get("binding", {})),
        )


class Registry:
    """Immutable map of tool name -> ToolSpec with a revision counter."""

    def __init__(self, tools: Iterable[ToolSpec] = (), version: int = 0):
        self._tools: dict[str, ToolSpec] = {}
        for t in tools:
            self._tools[t.name] = t
        self.version = version

    def __len__(self) -> int:
        return len(self._tools)

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def get(self, name: str) -> ToolSpec | None:
        return self._tools.get(name)

    def names(self) -> list[str]:
        return list(self._tools.keys())

    def specs(self) -> list[ToolSpec]:
        return list(self._tools.values())

    def corpus(self) -> list[tuple[str, str]]:
        """Derived (name, description) view used by the retrievers."""
        return [(t.name, t.description) for t in self._tools.values()]


def register_tool(registry: Registry, spec: ToolSpec) -> Registry:
    """Return a new registry revision containing spec; never mutates."""
    problems = spec.problems()
    if problems:
        raise InvalidSpec(problems)
    if spec.name in registry:
        raise DuplicateName(f"tool {spec.name!r} already registered")
    for w in spec.lint_warnings():
        logger.warning(w)
    return Registry(registry.specs() + [spec], version=registry.version + 1)


def load_registry(path_or_text: str, *, is_text: bool = False) -> Registry:
    """Load a registry document: {"tools": [{name, description, params, binding}]}.

    Iteration order of the result follows file order.  All per-tool spec
    problems are aggregated into one InvalidSpec.
    """
    if is_text:
        text = path_or_text
    else:
        with open(path_or_text, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"registry document is not valid JSON: {e.msg}", e.lineno, e.colno) from e
    if not isinstance(doc, dict) or not isinstance(doc.get("tools"), list):
        raise ParseError("registry document must be an object with a top-level 'tools' list")

    registry = Registry()
    problems: list[str] = []
    for i, entry in enumerate(doc["tools"]):
        if not isinstance(entry, dict):
            problems.append(f"tools[{i}] is not an object")
            continue
        spec = ToolSpec.from_dict(entry)
        tool_problems = spec.problems()
        if spec.name in registry:
            tool_problems.append(f"tool {spec.name!r} appears more than once")
        if tool_problems:
            problems.extend(tool_problems)
            continue
        registry = register_tool(registry, spec)
    if problems:
        raise InvalidSpec(problems)
    return registry


def dump_registry(registry: Registry) -> str:
    return json.dumps({"tools": [t.to_dict() for t in registry.specs()]}, indent=2)


@dataclass(frozen=True)
class ValidatedCall:
    """A call that passed schema validation; arguments are coerced."""

    name: str
    arguments: dict[str, Any]
    fingerprint: str
    spec: ToolSpec


_INT_RE = re.compile(r"[+-]?\d+$")
_NUM_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _coerce(value: Any, param: ParamSpec) -> tuple[Any, str | None]:
    """Coerce value to the declared kind; returns (value, error message or None).

    Numeric strings are coerced to numeric kinds because models routinely
    quote numbers; everything else is strict.
    """
    kind = param.kind
    got = type(value).__name__
    if kind == "string":
        if isinstance(value, str):
            return value, None
        return value, f"expected string, got {got}"
    if kind == "integer":
        if isinstance(value, bool):
            return value, f"expected integer, got {got}"
        if isinstance(value, int):
            return value, None
        if isinstance(value, str) and _INT_RE.match(value.strip()):
            return int(value.strip()), None
        return value, f"expected integer, got {got}"
    if kind == "number":
        if isinstance(value, bool):
            return value, f"expected number, got {got}"
        if isinstance(value, (int, float)):
            return float(value), None
        if isinstance(value, str) and _NUM_RE.match(value.strip()):
            return float(value.strip()), None
        return value, f"expected number, got {got}"
    if kind == "boolean":
        if isinstance(value, bool):
            return value, None
        return value, f"expected boolean, got {got}"
    if kind == "enum":
        if isinstance(value, str) and value in param.values:
            return value, None
        return value, f"expected one of {list(param.values)}, got {value!r}"
    return value, f"unknown kind {kind!r}"


def validate_call(registry: Registry, call: FunctionCall) -> ValidatedCall:
    """Validate a call against its tool schema.

    Every violation is collected so the error message names all offending
    parameters; that message is exactly what the agent loop feeds back to
    the model.  Deterministic and side-effect free.
    """
    spec = registry.get(call.name)
    if spec is None:
        raise CallValidationError(
            [Violation("unknown_tool", call.name, f'unknown tool "{call.name}"')]
        )

    violations: list[Violation] = []
    coerced: dict[str, Any] = {}

    for key in call.arguments:
        if spec.param(key) is None:
            violations.append(
                Violation("unknown_param", key, f'unknown parameter "{key}" for tool "{call.name}"')
            )
    for p in spec.params:
        if p.name not in call.arguments:
            if p.required:
                violations.append(
                    Violation(
                        "missing_required_param",
                        p.name,
                        f'missing required parameter "{p.name}" for tool "{call.name}"',
                    )
                )
            continue  # optional and absent: omitted
        value, err = _coerce(call.arguments[p.name], p)
        if err:
            violations.append(
                Violation("type_mismatch", p.name, f'parameter "{p.name}": {err}')
            )
        else:
            coerced[p.name] = value

    if violations:
        raise CallValidationError(violations)
    return ValidatedCall(
        name=call.name,
        arguments=coerced,
        fingerprint=call_fingerprint(call.name, coerced),
        spec=spec,
    )
