"""Ingestion and cleaning of the review, description and Q&A corpora."""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
import re
import string
from dataclasses import dataclass, field, replace
from pathlib import Path

logger = logging.getLogger(__name__)

REVIEW_FIELDS = ("review_id", "product_id", "date", "heading", "rating", "text", "helpful_votes")

_PRINTABLE = frozenset(string.printable)
_WS_RUN = re.compile(r"\s+")


class CorpusError(ValueError):
    """Raised when input files cannot be turned into a valid corpus."""


class RecordError(CorpusError):
    def __init__(self, locator: str, message: str):
        super().__init__(f"{locator}: {message}")
        self.locator = locator
        self.reason = message


@dataclass(frozen=True)
class Review:
    review_id: str
    product_id: str
    date: dt.date
    heading: str
    rating: int
    text: str
    helpful_votes: int

    def to_dict(self) -> dict:
        return {
            "review_id": self.review_id,
            "product_id": self.product_id,
            "date": self.date.isoformat(),
            "heading": self.heading,
            "rating": self.rating,
            "text": self.text,
            "helpful_votes": self.helpful_votes,
        }


@dataclass(frozen=True)
class ProductDescription:
    product_id: str
    description_text: str = ""


@dataclass(frozen=True)
class QACollection:
    product_id: str
    questions: tuple[str, ...] = ()
    answers: tuple[str, ...] = ()


@dataclass
class CleaningReport:
    reviews_in: int = 0
    dropped_empty_text: list[str] = field(default_factory=list)
    modified_text: int = 0
    votes_capped: int = 0
    vote_cap: float = 0.0
    rejected_records: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "reviews_in": self.reviews_in,
            "dropped_empty_text": len(self.dropped_empty_text),
            "dropped_review_ids": list(self.dropped_empty_text),
            "modified_text": self.modified_text,
            "votes_capped": self.votes_capped,
            "vote_cap": self.vote_cap,
            "rejected_records": list(self.rejected_records),
        }


@dataclass
class Corpus:
    reviews: list[Review]
    descriptions: dict[str, ProductDescription]
    qa: dict[str, QACollection]
    cleaning_report: CleaningReport = field(default_factory=CleaningReport)

    def description_for(self, product_id: str) -> ProductDescription:
        return self.descriptions.get(product_id, ProductDescription(product_id))

    def qa_for(self, product_id: str) -> QACollection:
        return self.qa.get(product_id, QACollection(product_id))

    def to_dict(self) -> dict:
        return {
            "reviews": [r.to_dict() for r in self.reviews],
            "descriptions": {
                pid: d.description_text for pid, d in sorted(self.descriptions.items())
            },
            "qa": {
                pid: {"questions": list(q.questions), "answers": list(q.answers)}
                for pid, q in sorted(self.qa.items())
            },
            "cleaning_report": self.cleaning_report.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Corpus":
        reviews = [_review_from_mapping(r, f"corpus review {i}") for i, r in enumerate(data["reviews"])]
        descriptions = {
            pid: ProductDescription(pid, text) for pid, text in data.get("descriptions", {}).items()
        }
        qa = {
            pid: QACollection(pid, tuple(v.get("questions", ())), tuple(v.get("answers", ())))
            for pid, v in data.get("qa", {}).items()
        }
        report = CleaningReport()
        raw = data.get("cleaning_report") or {}
        report.reviews_in = raw.get("reviews_in", len(reviews))
        report.dropped_empty_text = list(raw.get("dropped_review_ids", []))
        report.modified_text = raw.get("modified_text", 0)
        report.votes_capped = raw.get("votes_capped", 0)
        report.vote_cap = raw.get("vote_cap", 0.0)
        report.rejected_records = list(raw.get("rejected_records", []))
        return cls(reviews, descriptions, qa, report)


def clean_text(raw: str) -> str:
    """Keep printable ASCII only, collapse whitespace runs, trim.

    Non-ASCII code points are dropped; non-ASCII whitespace such as
    NBSP is treated as a plain space so words stay separated.
    """
    kept = []
    for ch in raw:
        if ch in _PRINTABLE:
            kept.append(ch)
        elif ch.isspace():
            # unicode whitespace (NBSP, em space) still separates words
            kept.append(" ")
    return _WS_RUN.sub(" ", "".join(kept)).strip()


def _parse_int(value, name: str, locator: str) -> int:
    if isinstance(value, bool):
        raise RecordError(locator, f"{name} is not an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            pass
    raise RecordError(locator, f"{name} is not an integer: {value!r}")


def _review_from_mapping(rec: dict, locator: str) -> Review:
    missing = [f for f in REVIEW_FIELDS if f not in rec or rec[f] is None]
    if missing:
        raise RecordError(locator, f"missing field(s) {', '.join(missing)}")
    rating = _parse_int(rec["rating"], "rating", locator)
    if not 1 <= rating <= 5:
        raise RecordError(locator, f"rating out of range: {rating}")
    votes = _parse_int(rec["helpful_votes"], "helpful_votes", locator)
    if votes < 0:
        raise RecordError(locator, f"negative helpful_votes: {votes}")
    try:
        date = dt.date.fromisoformat(str(rec["date"]).strip()[:10])
    except ValueError:
        raise RecordError(locator, f"unparseable date: {rec['date']!r}") from None
    review_id = str(rec["review_id"]).strip()
    if not review_id:
        raise RecordError(locator, "empty review_id")
    return Review(
        review_id=review_id,
        product_id=str(rec["product_id"]).strip(),
        date=date,
        heading=str(rec["heading"]),
        rating=rating,
        text=str(rec["text"]),
        helpful_votes=votes,
    )


def _iter_records(path: Path, fmt: str):
    if fmt == "jsonl":
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                locator = f"{path.name}:{lineno}"
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    yield locator, RecordError(locator, f"invalid JSON ({exc.msg})")
                    continue
                if not isinstance(rec, dict):
                    yield locator, RecordError(locator, "record is not an object")
                    continue
                yield locator, rec
    elif fmt == "csv":
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                # header is line 1
                yield f"{path.name}:{reader.line_num}", rec
    else:
        raise CorpusError(f"unsupported format {fmt!r} (expected csv or jsonl)")


def _guess_format(path: Path) -> str:
    return "csv" if path.suffix.lower() == ".csv" else "jsonl"


def parse_reviews(
    path, fmt: str | None = None, max_error_rate: float = 0.10, errors: list | None = None
) -> list[Review]:
    """Parse a review file, rejecting malformed records.

    Rejected records are logged with their ``file:line`` locator and, when
    ``errors`` is given, appended to it. Parsing aborts with
    :class:`CorpusError` only when the rejected fraction exceeds
    ``max_error_rate``.
    """
    path = Path(path)
    fmt = fmt or _guess_format(path)
    reviews, rejected = [], []
    for locator, rec in _iter_records(path, fmt):
        if isinstance(rec, RecordError):
            rejected.append(rec)
            continue
        try:
            reviews.append(_review_from_mapping(rec, locator))
        except RecordError as exc:
            rejected.append(exc)
    for exc in rejected:
        logger.warning("rejected review record %s", exc)
    if errors is not None:
        errors.extend(str(e) for e in rejected)
    total = len(reviews) + len(rejected)
    if total and len(rejected) / total > max_error_rate:
        raise CorpusError(
            f"{path}: {len(rejected)} of {total} records malformed "
            f"(limit {max_error_rate:.0%}); first: {rejected[0]}"
        )
    return reviews


def parse_descriptions(path) -> dict[str, ProductDescription]:
    """Read ``{"product_id", "attributes": [{"name", "value"}]}`` lines.

    Attributes flatten to ``"name: value. name: value."``.
    """
    path = Path(path)
    out: dict[str, ProductDescription] = {}
    for locator, rec in _iter_records(path, "jsonl"):
        if isinstance(rec, RecordError):
            raise rec
        if "product_id" not in rec:
            raise RecordError(locator, "missing field product_id")
        pid = str(rec["product_id"])
        if pid in out:
            raise RecordError(locator, f"duplicate description for product {pid}")
        parts = []
        for attr in rec.get("attributes") or []:
            name = str(attr.get("name", "")).strip()
            value = str(attr.get("value", "")).strip()
            if name or value:
                parts.append(f"{name}: {value}.")
        out[pid] = ProductDescription(pid, " ".join(parts))
    return out


def parse_qa(path) -> dict[str, QACollection]:
    path = Path(path)
    questions: dict[str, list[str]] = {}
    answers: dict[str, list[str]] = {}
    for locator, rec in _iter_records(path, "jsonl"):
        if isinstance(rec, RecordError):
            raise rec
        if "product_id" not in rec:
            raise RecordError(locator, "missing field product_id")
        pid = str(rec["product_id"])
        questions.setdefault(pid, [])
        answers.setdefault(pid, [])
        if rec.get("question"):
            questions[pid].append(str(rec["question"]))
        if rec.get("answer"):
            answers[pid].append(str(rec["answer"]))
    return {pid: QACollection(pid, tuple(questions[pid]), tuple(answers[pid])) for pid in questions}


def cap_votes(reviews: list[Review]) -> tuple[list[Review], float]:
    """Curtail votes at three times the mean of the non-zero votes.

    Returns the capped reviews and the (unfloored) cap. With no positive
    votes the cap is 0 and nothing changes.
    """
    if not reviews:
        raise ValueError("cap_votes needs at least one review")
    positive = [r.helpful_votes for r in reviews if r.helpful_votes > 0]
    if not positive:
        return list(reviews), 0.0
    cap = 3.0 * math.fsum(positive) / len(positive)
    limit = math.floor(cap)
    capped = [
        replace(r, helpful_votes=limit) if r.helpful_votes > limit else r for r in reviews
    ]
    return capped, cap


def build_corpus(
    reviews: list[Review],
    descriptions: dict[str, ProductDescription] | None = None,
    qa: dict[str, QACollection] | None = None,
) -> Corpus:
    """Clean texts, drop empty reviews and join everything by product."""
    descriptions = dict(descriptions or {})
    qa = dict(qa or {})
    report = CleaningReport(reviews_in=len(reviews))
    seen: set[str] = set()
    kept: list[Review] = []
    for r in reviews:
        if r.review_id in seen:
            raise CorpusError(f"duplicate review_id {r.review_id!r}")
        seen.add(r.review_id)
        text = clean_text(r.text)
        if not text:
            report.dropped_empty_text.append(r.review_id)
            continue
        if text != r.text:
            report.modified_text += 1
        kept.append(replace(r, text=text, heading=clean_text(r.heading)))

    clean_desc = {
        pid: ProductDescription(pid, clean_text(d.description_text)) for pid, d in descriptions.items()
    }
    clean_qa = {
        pid: QACollection(
            pid,
            tuple(t for t in (clean_text(x) for x in q.questions) if t),
            tuple(t for t in (clean_text(x) for x in q.answers) if t),
        )
        for pid, q in qa.items()
    }
    for pid in sorted({r.product_id for r in kept}):
        clean_desc.setdefault(pid, ProductDescription(pid))
        clean_qa.setdefault(pid, QACollection(pid))
    kept.sort(key=lambda r: r.review_id)
    if report.dropped_empty_text:
        logger.info("dropped %d review(s) with empty text", len(report.dropped_empty_text))
    return Corpus(kept, clean_desc, clean_qa, report)


def apply_vote_cap(corpus: Corpus) -> Corpus:
    """Return a copy of ``corpus`` with :func:`cap_votes` applied."""
    if not corpus.reviews:
        return corpus
    capped, cap = cap_votes(corpus.reviews)
    report = replace(
        corpus.cleaning_report,
        dropped_empty_text=list(corpus.cleaning_report.dropped_empty_text),
        rejected_records=list(corpus.cleaning_report.rejected_records),
    )
    report.vote_cap = cap
    report.votes_capped = sum(a.helpful_votes != b.helpful_votes for a, b in zip(corpus.reviews, capped))
    return Corpus(capped, corpus.descriptions, corpus.qa, report)


def save_corpus(corpus: Corpus, path) -> None:
    from revrank._io import atomic_write_text

    atomic_write_text(path, json.dumps(corpus.to_dict(), indent=1, sort_keys=True) + "\n")


def load_corpus(path) -> Corpus:
    with Path(path).open(encoding="utf-8") as fh:
        return Corpus.from_dict(json.load(fh))
