import numpy as np
import pytest

from subreglab import dsl
from subreglab.corpus import load_entry


def make_fn(pieces, dim=1, box=None, semialgebraic=True, name=""):
    """Build a function from a body string or a list of ``(guard, body)`` pairs."""
    if isinstance(pieces, str):
        pieces = [([], pieces)]
    box = box or [[-4.0, 4.0]] * dim
    doc = {"name": name, "dim": dim, "box": box,
           "pieces": [{"guard": list(g), "body": b} for g, b in pieces],
           "flags": {"claims_semialgebraic": semialgebraic, "claims_lsc": True}}
    return dsl.from_dict(doc)


@pytest.fixture(scope="session")
def corpus_fn():
    cache = {}

    def get(entry_id):
        if entry_id not in cache:
            cache[entry_id] = load_entry(entry_id).f
        return cache[entry_id]
    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
