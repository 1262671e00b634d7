import datetime as dt
from pathlib import Path

import pytest

from revrank.corpus_io import ProductDescription, QACollection, Review, build_corpus
from revrank.text_features import load_lexicons

FIXTURES = Path(__file__).parent / "fixtures"

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def lexicons():
    return load_lexicons()


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


def make_review(rid, pid="P1", text="Good phone.", votes=0, rating=5, date=dt.date(2020, 1, 1), heading=""):
    return Review(rid, pid, date, heading, rating, text, votes)


@pytest.fixture
def tiny_corpus():
    reviews = [
        make_review("r1", text="Great battery life and bright screen.", votes=10, date=dt.date(2020, 1, 1)),
        make_review("r2", text="The screen cracked. Bad.", votes=1, rating=1, date=dt.date(2020, 2, 1)),
        make_review("r3", text="Battery is fine I guess.", votes=4, rating=3, date=dt.date(2020, 3, 1)),
        make_review("r4", text="Bright screen, long battery, fast charger.", votes=8, date=dt.date(2020, 4, 1)),
        make_review("q1", "P2", "Sound is loud and clear.", votes=3, date=dt.date(2021, 1, 1)),
        make_review("q2", "P2", "Sound is muffled.", votes=0, rating=2, date=dt.date(2021, 1, 2)),
    ]
    desc = {
        "P1": ProductDescription("P1", "Battery: 4000 mAh. Screen: bright display."),
        "P2": ProductDescription("P2", "Sound: loud speaker."),
    }
    qa = {"P1": QACollection("P1", ("How long does the battery last?",), ("Two days.",))}
    return build_corpus(reviews, desc, qa)
