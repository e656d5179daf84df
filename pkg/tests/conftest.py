from pathlib import Path

import numpy as np
import pytest

from cobra_review.ingest import build_instance, load_similarity_csv, read_authorship_csv

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

# six-agent trace example: preferences, agents 1-based, best first
TRACE_RANKINGS = {
    1: [2, 3, 4, 5, 6],
    2: [3, 1, 5, 4, 6],
    3: [1, 2, 5, 4, 6],
    4: [1, 3, 5, 2, 6],
    5: [6, 4, 1, 2, 3],
    6: [2, 1, 3, 4, 5],
}
TRACE_FINAL = {1: {2, 5, 6}, 2: {1, 3, 6}, 3: {1, 2, 4}, 4: {1, 5, 6}, 5: {2, 3, 4}, 6: {3, 4, 5}}


def load_fixture(name: str, k_a: int, k_p: int):
    ds = load_similarity_csv(FIXTURES / f"{name}_scores.csv", FIXTURES / f"{name}_conflicts.csv")
    auth = read_authorship_csv(FIXTURES / f"{name}_authorship.csv")
    return build_instance(ds, auth, k_a, k_p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def trace_example():
    return load_fixture("trace_example", 3, 3)


@pytest.fixture
def n3():
    return load_fixture("n3", 1, 1)


@pytest.fixture
def n4():
    return load_fixture("n4", 1, 1)


def pytest_terminal_summary(terminalreporter):
    from helpers import VERDICTS

    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
