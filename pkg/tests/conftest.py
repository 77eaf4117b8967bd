import json
from pathlib import Path

import pytest

from bias_audit.cache import CACHE_DIR_ENV
from bias_audit.cli import main as cli_main

DATA_DIR = Path(__file__).parent / "data"
FIXTURE_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    # keep every test away from the user-level response cache
    monkeypatch.setenv(CACHE_DIR_ENV, str(tmp_path / "llm-cache"))


@pytest.fixture()
def synth_root() -> Path:
    return DATA_DIR / "synthetic_corpus"


@pytest.fixture()
def run_cli():
    def run(*argv) -> int:
        return cli_main([str(a) for a in argv])

    return run


@pytest.fixture(scope="session")
def response_fixtures() -> list[dict]:
    path = FIXTURE_DIR / "llm_responses.json"
    return json.loads(path.read_text(encoding="utf-8"))
