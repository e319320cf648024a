"""Executes validated calls: builtin handlers, HTTP bindings, fixtures.

All network traffic goes through an injected transport so tests can count
or forbid connection attempts.  fixtures_only mode never touches the
transport at all: payloads come from the fingerprint-named fixture store
or the call fails with a fixture-missing outcome.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Protocol
from urllib.parse import quote

from .calls import ToolOutcome, request_fingerprint
from .errors import CacheIoError, FixtureMissing, NetworkAttempt, UpstreamError
from .registry import ValidatedCall

MODES = ("live", "fixtures_only", "record")


@dataclass
class TransportResponse:
    status: int
    body: str


class Transport(Protocol):
    def request(self, method: str, url: str, params: dict[str, Any] | None = None,
                timeout: float = 30.0) -> TransportResponse: ...


class RequestsTransport:
    """Live HTTP via requests; only constructed for real runs."""

    def request(self, method: str, url: str, params: dict[str, Any] | None = None,
                timeout: float = 30.0) -> TransportResponse:
        import requests

        resp = requests.request(method, url, params=params, timeout=timeout)
        return TransportResponse(status=resp.status_code, body=resp.text)


class StubTransport:
    """Routes URL substrings to canned responses; used by tests and demos."""

    def __init__(self, routes: list[tuple[str, int, str]]):
        # routes: (url substring, status, body); first match wins
        self.routes = routes
        self.calls: list[tuple[str, str, dict[str, Any] | None]] = []

    def request(self, method: str, url: str, params: dict[str, Any] | None = None,
                timeout: float = 30.0) -> TransportResponse:
        self.calls.append((method, url, params))
        for fragment, status, body in self.routes:
            if fragment in url:
                return TransportResponse(status=status, body=body)
        return TransportResponse(status=404, body='{"error": "no stub route"}')


class CountingTransport:
    """Wraps a transport and counts requests."""

    def __init__(self, inner: Transport):
        self.inner = inner
        self.count = 0

    def request(self, method: str, url: str, params: dict[str, Any] | None = None,
                timeout: float = 30.0) -> TransportResponse:
        self.count += 1
        return self.inner.request(method, url, params, timeout)


class ForbiddenTransport:
    """Any request is a hard failure; asserts hermetic runs stay offline."""

    def __init__(self):
        self.attempts = 0

    def request(self, method: str, url: str, params: dict[str, Any] | None = None,
                timeout: float = 30.0) -> TransportResponse:
        self.attempts += 1
        raise NetworkAttempt(f"network attempt in hermetic mode: {method} {url}")


@dataclass
class CacheEntry:
    """One stored upstream response, keyed by request fingerprint."""

    fingerprint: str
    request: dict[str, Any]
    status: int
    body: str
    fetched_at: float
    ttl: float | None = None  # None: never expires

    def expired(self, now: float) -> bool:
        return self.ttl is not None and now - self.fetched_at >= self.ttl

    def to_dict(self) -> dict[str, Any]:
        return {
            "fingerprint": self.fingerprint,
            "request": self.request,
            "status": self.status,
            "body": self.body,
            "fetched_at": self.fetched_at,
            "ttl": self.ttl,
        }


class FixtureStore:
    """Directory of fingerprint-named JSON files acting as cache and fixtures."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def path(self, fingerprint: str) -> Path:
        return self.directory / f"{fingerprint}.json"

    def get(self, fingerprint: str) -> CacheEntry | None:
        p = self.path(fingerprint)
        if not p.exists():
            return None
        try:
            d = json.loads(p.read_text(encoding="utf-8"))
            return CacheEntry(
                fingerprint=d["fingerprint"],
                request=d.get("request", {}),
                status=int(d["status"]),
                body=d["body"],
                fetched_at=float(d.get("fetched_at", 0.0)),
                ttl=d.get("ttl"),
            )
        except (OSError, ValueError, KeyError) as e:
            raise CacheIoError(f"unreadable fixture {p}: {e}") from e

    def put(self, entry: CacheEntry) -> None:
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            self.path(entry.fingerprint).write_text(
                json.dumps(entry.to_dict(), sort_keys=True, indent=2),
                encoding="utf-8",
            )
        except OSError as e:
            raise CacheIoError(f"cannot write fixture: {e}") from e


@dataclass
class ExecutionEnv:
    """Execution settings: mode, transport, cache store, retry policy."""

    mode: str = "fixtures_only"
    transport: Transport | None = None
    store: FixtureStore | None = None
    named_fixture_dir: Path | None = None
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 0.5
    default_ttl: float | None = None
    api_keys: dict[str, bool] = field(default_factory=dict)
    sleep: Callable[[float], None] = time.sleep
    clock: Callable[[], float] = time.perf_counter

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"invalid mode {self.mode!r}")

    def fetch(self, method: str, url: str, params: dict[str, Any] | None = None,
              ttl: float | None = None) -> tuple[str, bool]:
        """Fetch an upstream payload honoring mode and cache.

        Returns (body, stale).  record mode always hits upstream and stores;
        live mode serves fresh cache hits; fixtures_only never touches the
        transport and serves expired entries with the stale flag set.
        """
        fingerprint = request_fingerprint(method, url, params)
        ttl = self.default_ttl if ttl is None else ttl
        now = time.time()

        if self.mode == "fixtures_only":
            entry = self.store.get(fingerprint) if self.store else None
            if entry is None:
                raise FixtureMissing(
                    f"no fixture for {method} {url} (fingerprint {fingerprint})"
                )
            if entry.status >= 400:
                raise UpstreamError(f"upstream status {entry.status} (fixture)")
            return entry.body, entry.expired(now)

        if self.mode == "live" and self.store is not None:
            entry = self.store.get(fingerprint)
            if entry is not None and not entry.expired(now) and entry.status < 400:
                return entry.body, False

        response = self._request_with_retry(method, url, params)
        if self.store is not None:
            self.store.put(CacheEntry(
                fingerprint=fingerprint,
                request={"method": method.upper(), "url": url, "params": params or {}},
                status=response.status,
                body=response.body,
                fetched_at=now,
                ttl=ttl,
            ))
        if response.status >= 400:
            raise UpstreamError(f"upstream status {response.status} for {url}")
        return response.body, False

    def _request_with_retry(self, method: str, url: str,
                            params: dict[str, Any] | None) -> TransportResponse:
        if self.transport is None:
            raise UpstreamError("no transport configured for network mode")
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                response = self.transport.request(method, url, params, self.timeout)
            except NetworkAttempt:
                raise
            except Exception as e:
                last_error = e
                if attempt < self.retries - 1:
                    self.sleep(self.backoff * (2 ** attempt))
                continue
            if 500 <= response.status < 600 and attempt < self.retries - 1:
                self.sleep(self.backoff * (2 ** attempt))
                continue
            return response  # 4xx is terminal, success returns
        raise UpstreamError(f"network failure after {self.retries} attempts: {last_error}")


# --- builtin handlers ----------------------------------------------------------

BuiltinHandler = Callable[[ExecutionEnv, dict[str, Any]], str]
_BUILTINS: dict[str, BuiltinHandler] = {}


def register_builtin(handler_id: str, fn: BuiltinHandler) -> None:
    _BUILTINS[handler_id] = fn


def builtin_ids() -> list[str]:
    return sorted(_BUILTINS)


def _echo(env: ExecutionEnv, args: dict[str, Any]) -> str:
    return json.dumps(args, sort_keys=True)


register_builtin("echo", _echo)


# --- JSON path extraction -------------------------------------------------------

_PATH_PART = re.compile(r"([^.\[\]]+)|\[(\d+)\]")


def extract_path(document: Any, path: str) -> Any:
    """Resolve a dotted path with [n] indexes, e.g. results[0].warnings[0]."""
    if not path:
        return document
    node = document
    for m in _PATH_PART.finditer(path):
        key, idx = m.group(1), m.group(2)
        if key is not None:
            if not isinstance(node, dict) or key not in node:
                raise KeyError(path)
            node = node[key]
        else:
            i = int(idx)
            if not isinstance(node, list) or i >= len(node):
                raise KeyError(path)
            node = node[i]
    return node


def _fill_template(template: str, arguments: dict[str, Any]) -> str:
    def sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in arguments:
            raise KeyError(f"url template references unknown parameter {name!r}")
        return quote(str(arguments[name]), safe="")

    return re.sub(r"\{(\w+)\}", sub, template)


# --- dispatch -------------------------------------------------------------------

def execute(env: ExecutionEnv, call: ValidatedCall) -> ToolOutcome:
    """Run one validated call; failures become outcomes, never crashes."""
    started = env.clock()

    def done(status: str, payload: str = "", detail: str = "") -> ToolOutcome:
        return ToolOutcome(
            status=status,
            fingerprint=call.fingerprint,
            payload=payload,
            detail=detail,
            latency=env.clock() - started,
        )

    binding = call.spec.binding
    try:
        if binding.type == "builtin":
            handler = _BUILTINS.get(binding.handler)
            if handler is None:
                return done("execution_error", detail=f"unknown builtin handler {binding.handler!r}")
            return done("ok", payload=handler(env, call.arguments))

        if binding.type == "http":
            url = _fill_template(binding.url_template, call.arguments)
            body, stale = env.fetch(binding.method, url)
            try:
                document = json.loads(body)
            except json.JSONDecodeError:
                return done("execution_error", detail="upstream returned invalid JSON")
            try:
                value = extract_path(document, binding.extract)
            except KeyError:
                return done("execution_error",
                            detail=f"extraction path {binding.extract!r} missing from payload")
            payload = value if isinstance(value, str) else json.dumps(value, sort_keys=True)
            return done("ok", payload=payload, detail="stale cache entry" if stale else "")

        if binding.type == "fixture":
            directory = env.named_fixture_dir
            if directory is None:
                return done("execution_error", detail="no named fixture directory configured")
            path = Path(directory) / binding.file_id
            if not path.exists():
                return done("execution_error", detail=f"fixture {binding.file_id!r} missing")
            return done("ok", payload=path.read_text(encoding="utf-8"))

        return done("execution_error", detail=f"unsupported binding type {binding.type!r}")
    except NetworkAttempt:
        raise  # hermeticity assertions must not be swallowed
    except FixtureMissing as e:
        return done("execution_error", detail=f"fixture missing: {e}")
    except UpstreamError as e:
        return done("execution_error", detail=f"network: {e}")
    except Exception as e:  # adversarial payloads, handler bugs
        return done("execution_error", detail=f"{type(e).__name__}: {e}")
