import sys
from contextlib import contextmanager
from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def toy_corpus():
    """The bundled 10-review corpus, loaded once per session."""
    from reviewgen.textdata import load_dataset

    return load_dataset(FIXTURES / "reviews.jsonl", FIXTURES / "features.bin",
                        min_count=1)


@pytest.fixture
def announce(capsys):
    """Context manager printing one PASS/FAIL line per acceptance criterion,
    bypassing pytest's capture so the verdicts reach the terminal."""

    @contextmanager
    def _announce(number: int, name: str):
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"ACCEPTANCE {number} {name}: FAIL", file=sys.stderr)
            raise
        else:
            with capsys.disabled():
                print(f"ACCEPTANCE {number} {name}: PASS", file=sys.stderr)

    return _announce
