import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles importable as a module

from toolloop.cli import data_path
from toolloop.executor import ExecutionEnv, FixtureStore, StubTransport
from toolloop.labels import DAILYMED_BASE, OPENFDA_LABEL_URL
from toolloop.registry import Registry, load_registry

TESTS_DIR = Path(__file__).parent
GOLDEN_DIR = TESTS_DIR / "golden"


@pytest.fixture(scope="session")
def fixture_registry() -> Registry:
    return load_registry(str(data_path("registry.json")))


@pytest.fixture()
def named_fixture_dir() -> Path:
    return Path(data_path("named_fixtures"))


def upstream_body(name: str) -> str:
    return Path(data_path("upstream", name)).read_text(encoding="utf-8")


@pytest.fixture()
def drug_api_stub() -> StubTransport:
    """Canned DailyMed and openFDA responses behind a counting transport."""
    return StubTransport([
        (f"{DAILYMED_BASE}/spls.json", 200, upstream_body("dailymed_warfarin_listing.json")),
        ("/spls/0f8f0c7a-3b1e-4f2a-9f6d-2a7c5e1b9d04.xml", 200,
         upstream_body("dailymed_warfarin_spl.xml")),
        (OPENFDA_LABEL_URL, 200, upstream_body("openfda_warfarin_label.json")),
    ])


@pytest.fixture()
def live_env(tmp_path, drug_api_stub, named_fixture_dir) -> ExecutionEnv:
    return ExecutionEnv(
        mode="live",
        transport=drug_api_stub,
        store=FixtureStore(tmp_path / "fixtures"),
        named_fixture_dir=named_fixture_dir,
        sleep=lambda _s: None,
        clock=lambda: 0.0,
    )


@pytest.fixture()
def offline_env(named_fixture_dir, tmp_path) -> ExecutionEnv:
    """fixtures_only with no transport at all; builtins and fixtures only."""
    return ExecutionEnv(
        mode="fixtures_only",
        transport=None,
        store=FixtureStore(tmp_path / "fixtures"),
        named_fixture_dir=named_fixture_dir,
        sleep=lambda _s: None,
        clock=lambda: 0.0,
    )
