"""Function calls, tool outcomes, and canonical fingerprints.

A fingerprint identifies a call by tool name plus sorted arguments, so the
same call is recognized no matter the argument order the model used.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

Scalar = Any  # str | int | float | bool (validation narrows this)


@dataclass(frozen=True)
class FunctionCall:
    """One model-emitted call: a tool name and scalar arguments."""

    name: str
    arguments: dict[str, Scalar] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "arguments": dict(self.arguments)}


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def call_fingerprint(name: str, arguments: dict[str, Scalar]) -> str:
    """Order-insensitive hash of (name, arguments); 16 hex chars."""
    blob = canonical_json({"name": name, "arguments": arguments})
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def request_fingerprint(method: str, url: str, params: dict[str, Any] | None = None) -> str:
    """Fingerprint for an HTTP request; params are sorted before hashing."""
    blob = canonical_json({"method": method.upper(), "url": url, "params": params or {}})
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class ToolOutcome:
    """Validated execution result of one call.

    status is one of: ok, validation_error, execution_error, cached.
    cached is only legal when an identical fingerprint succeeded earlier in
    the same session.  payload_size carries the byte size of the payload so
    large-context tools are visible to downstream consumers.
    """

    status: str
    fingerprint: str
    payload: str = ""
    detail: str = ""
    latency: float = 0.0
    payload_size: int = 0

    def __post_init__(self):
        if self.status not in ("ok", "validation_error", "execution_error", "cached"):
            raise ValueError(f"invalid outcome status: {self.status!r}")
        if not self.payload_size and self.payload:
            self.payload_size = len(self.payload.encode("utf-8"))

    @property
    def succeeded(self) -> bool:
        return self.status in ("ok", "cached")

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "fingerprint": self.fingerprint,
            "payload": self.payload,
            "detail": self.detail,
            "latency": self.latency,
            "payload_size": self.payload_size,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ToolOutcome":
        return cls(
            status=d["status"],
            fingerprint=d["fingerprint"],
            payload=d.get("payload", ""),
            detail=d.get("detail", ""),
            latency=d.get("latency", 0.0),
            payload_size=d.get("payload_size", 0),
        )
