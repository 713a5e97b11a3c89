from pathlib import Path

import pytest

from qkge.data import Vocabulary

ROOT = Path(__file__).resolve().parent.parent
UMLS = ROOT / "data" / "umls"


@pytest.fixture
def umls_dir():
    if not (UMLS / "train.txt").exists():
        pytest.skip("UMLS data not present")
    return UMLS


@pytest.fixture
def toy_kg(tmp_path):
    """3 entities, 1 relation, 2 positive triples written as a dataset dir."""
    (tmp_path / "train.txt").write_text("a\tlinks\tb\nb\tlinks\tc\n", encoding="utf-8")
    (tmp_path / "valid.txt").write_text("", encoding="utf-8")
    (tmp_path / "test.txt").write_text("", encoding="utf-8")
    return tmp_path


@pytest.fixture
def small_vocab():
    return Vocabulary([f"e{i}" for i in range(10)], ["r0", "r1", "r2"])


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
