import datetime as dt
import json

import pytest
from hypothesis import given, strategies as st

from revrank.corpus_io import (
    CorpusError,
    ProductDescription,
    QACollection,
    apply_vote_cap,
    build_corpus,
    cap_votes,
    clean_text,
    load_corpus,
    parse_descriptions,
    parse_qa,
    parse_reviews,
    save_corpus,
)

from conftest import make_review


def _jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def _rec(i, **over):
    rec = {"review_id": f"r{i}", "product_id": "P", "date": "2020-01-02", "heading": "h",
           "rating": 4, "text": "nice phone", "helpful_votes": 2}
    rec.update(over)
    return rec


# -- clean_text ---------------------------------------------------------------

@pytest.mark.parametrize("raw,expected", [
    ("good ★ phone", "good phone"),
    ("ok", "ok"),
    ("a  b", "a b"),
    ("  tabs\tand\nnewlines  ", "tabs and newlines"),
    ("★★", ""),
    ("café au lait", "caf au lait"),
])
def test_clean_text_examples(raw, expected):
    assert clean_text(raw) == expected


@given(st.text())
def test_clean_text_idempotent_and_ascii(s):
    once = clean_text(s)
    assert clean_text(once) == once
    assert all(32 <= ord(c) < 127 for c in once)
    assert once == once.strip()
    assert "  " not in once


# -- parse_reviews ------------------------------------------------------------

def test_parse_wellformed_jsonl(tmp_path):
    p = _jsonl(tmp_path / "r.jsonl", [_rec(i) for i in range(3)])
    reviews = parse_reviews(p)
    assert [r.review_id for r in reviews] == ["r0", "r1", "r2"]
    assert reviews[0].date == dt.date(2020, 1, 2)
    assert reviews[0].helpful_votes == 2


def test_parse_csv_matches_jsonl(tmp_path):
    import csv

    recs = [_rec(i, text=f"text, with comma {i}") for i in range(4)]
    with (tmp_path / "r.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(recs[0]))
        w.writeheader()
        w.writerows(recs)
    _jsonl(tmp_path / "r.jsonl", recs)
    assert parse_reviews(tmp_path / "r.csv") == parse_reviews(tmp_path / "r.jsonl")


@pytest.mark.parametrize("bad,message", [
    ({"rating": 7}, "rating out of range"),
    ({"helpful_votes": "-1"}, "negative helpful_votes"),
    ({"date": "yesterday"}, "unparseable date"),
    ({"rating": "five"}, "rating is not an integer"),
])
def test_rejection_carries_locator(tmp_path, bad, message):
    recs = [_rec(i) for i in range(20)]
    recs[5] = _rec(5, **bad)
    errors = []
    reviews = parse_reviews(_jsonl(tmp_path / "r.jsonl", recs), errors=errors)
    assert len(reviews) == 19
    assert len(errors) == 1
    assert "r.jsonl:6" in errors[0] and message in errors[0]


def test_missing_field_rejected(tmp_path):
    recs = [_rec(i) for i in range(20)]
    del recs[0]["text"]
    errors = []
    parse_reviews(_jsonl(tmp_path / "r.jsonl", recs), errors=errors)
    assert "missing field(s) text" in errors[0]


def test_abort_above_error_rate(tmp_path):
    recs = [_rec(i) for i in range(10)]
    recs[0]["rating"] = 0
    recs[1]["rating"] = 9
    p = _jsonl(tmp_path / "r.jsonl", recs)
    with pytest.raises(CorpusError, match="2 of 10"):
        parse_reviews(p)
    assert len(parse_reviews(p, max_error_rate=0.25)) == 8


def test_exactly_ten_percent_is_tolerated(tmp_path):
    recs = [_rec(i) for i in range(10)]
    recs[3]["rating"] = 0
    assert len(parse_reviews(_jsonl(tmp_path / "r.jsonl", recs))) == 9


def test_invalid_json_line_counts_as_rejection(tmp_path):
    p = tmp_path / "r.jsonl"
    lines = [json.dumps(_rec(i)) for i in range(19)] + ["{not json"]
    p.write_text("\n".join(lines) + "\n")
    errors = []
    assert len(parse_reviews(p, errors=errors)) == 19
    assert "r.jsonl:20" in errors[0]


# -- descriptions and QA -----------------------------------------------------------

def test_parse_descriptions_flattens_attributes(tmp_path):
    p = _jsonl(tmp_path / "d.jsonl", [
        {"product_id": "P", "attributes": [{"name": "Brand", "value": "Intex"},
                                           {"name": "Color", "value": "White"}]},
        {"product_id": "Q", "attributes": []},
    ])
    d = parse_descriptions(p)
    assert d["P"].description_text == "Brand: Intex. Color: White."
    assert d["Q"].description_text == ""


def test_duplicate_description_is_error(tmp_path):
    p = _jsonl(tmp_path / "d.jsonl", [{"product_id": "P"}, {"product_id": "P"}])
    with pytest.raises(CorpusError, match="duplicate"):
        parse_descriptions(p)


def test_parse_qa_groups_pairs(tmp_path):
    p = _jsonl(tmp_path / "q.jsonl", [
        {"product_id": "P", "question": "Is it good?", "answer": "Yes"},
        {"product_id": "P", "question": "Does it charge fast?", "answer": "No"},
    ])
    qa = parse_qa(p)
    assert qa["P"].questions == ("Is it good?", "Does it charge fast?")
    assert qa["P"].answers == ("Yes", "No")


# -- cap_votes -----------------------------------------------------------------

def _with_votes(votes):
    return [make_review(f"r{i}", votes=v) for i, v in enumerate(votes)]


def test_cap_all_zero():
    out, cap = cap_votes(_with_votes([0, 0, 0]))
    assert cap == 0 and [r.helpful_votes for r in out] == [0, 0, 0]


def test_cap_outlier():
    out, cap = cap_votes(_with_votes([1, 2, 3, 1000]))
    assert cap == pytest.approx(754.5)
    assert [r.helpful_votes for r in out] == [1, 2, 3, 754]


def test_cap_below():
    out, cap = cap_votes(_with_votes([5, 5, 5]))
    assert cap == 15 and [r.helpful_votes for r in out] == [5, 5, 5]


def test_cap_empty():
    with pytest.raises(ValueError):
        cap_votes([])


@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=40))
def test_cap_properties(votes):
    out, cap = cap_votes(_with_votes(votes))
    new = [r.helpful_votes for r in out]
    assert all(n <= v for n, v in zip(new, votes))
    assert all(n == v for n, v in zip(new, votes) if v <= cap)
    positive = [v for v in votes if v > 0]
    if positive:
        assert max(new) <= int(3 * sum(positive) / len(positive))


# -- build_corpus ---------------------------------------------------------------

def test_build_drops_empty_text():
    reviews = _with_votes([1, 2, 3, 4, 5])
    reviews[2] = make_review("r2", text="★★ ")
    c = build_corpus(reviews, {}, {})
    assert len(c.reviews) == 4
    assert c.cleaning_report.dropped_empty_text == ["r2"]


def test_build_fills_placeholders():
    c = build_corpus([make_review("r1", pid="BABY")], {}, {})
    assert c.qa_for("BABY") == QACollection("BABY", (), ())
    assert c.description_for("BABY") == ProductDescription("BABY", "")
    assert "BABY" in c.qa and "BABY" in c.descriptions


def test_build_duplicate_id():
    with pytest.raises(CorpusError, match="duplicate"):
        build_corpus([make_review("r1"), make_review("r1")])


def test_build_is_order_independent():
    reviews = [make_review(f"r{i}", text=f"text {i}", votes=i) for i in range(6)]
    a = build_corpus(reviews)
    b = build_corpus(list(reversed(reviews)))
    assert a.reviews == b.reviews


def test_corpus_round_trip(tmp_path, tiny_corpus):
    c = apply_vote_cap(tiny_corpus)
    save_corpus(c, tmp_path / "c.json")
    back = load_corpus(tmp_path / "c.json")
    assert back.reviews == c.reviews
    assert back.descriptions == c.descriptions
    assert back.qa == c.qa
    assert back.cleaning_report.to_dict() == c.cleaning_report.to_dict()
