"""Synthetic review corpora with known vote-generating functions.

Reviews are real text so that the whole feature path runs. Description and
question words are drawn from the same word pool as ordinary review words,
which keeps ``desc_sim``/``qa_sim`` invisible to the 15 text-only features.
"""

from __future__ import annotations

import datetime as dt
import math

import numpy as np

from revrank.corpus_io import ProductDescription, QACollection, Review, build_corpus
from revrank.dataset import FEATURE_NAMES, review_feature_row
from revrank.text_features import load_lexicons

_F = {name: i for i, name in enumerate(FEATURE_NAMES)}


def _word_pool(lexicons, size: int = 1500) -> list[str]:
    # alphabetic words known to both the tagger and the dictionary
    words = sorted(w for w in lexicons.pos if w.isalpha() and len(w) > 1 and w in lexicons.english)
    return words[:size] if len(words) > size else words


def vote_signal(row) -> float:
    """Noise-free vote level for one 17-feature row.

    Nonlinear in the two similarity features, review length, lexical
    diversity and rating.
    """
    sim = 1.0 / (1.0 + math.exp(-10.0 * (row[_F["desc_sim"]] + row[_F["qa_sim"]] - 0.55)))
    length = math.log1p(row[_F["length"]]) / math.log(200.0)
    rating = (row[_F["rating"]] - 3.0) / 2.0
    return 12.0 * sim * (0.5 + length) + 1.5 * row[_F["lex_diversity"]] * (1.0 + 0.5 * rating * rating)


def generate_corpus(
    n_reviews: int = 2000,
    n_products: int = 20,
    seed: int = 0,
    noise_sigma: float = 2.0,
    vote_fn=vote_signal,
    lexicons=None,
):
    """Build a :class:`~revrank.corpus_io.Corpus` with votes from ``vote_fn``.

    Votes are ``round(max(0, vote_fn(features) + N(0, noise_sigma)))``.
    Returns ``(corpus, signal)`` where ``signal`` maps review_id to the
    noise-free value.
    """
    lex = lexicons or load_lexicons()
    rng = np.random.default_rng(seed)
    pool = _word_pool(lex)
    pool_arr = np.array(pool)

    descriptions, qa, products = {}, {}, []
    for p in range(n_products):
        pid = f"P{p:03d}"
        products.append(pid)
        desc_words = rng.choice(pool_arr, size=30, replace=False)
        q_words = rng.choice(pool_arr, size=30, replace=False)
        attrs = [f"{a}: {b}." for a, b in zip(desc_words[::2], desc_words[1::2])]
        descriptions[pid] = ProductDescription(pid, " ".join(attrs))
        questions = tuple(" ".join(q_words[i:i + 6]) + "?" for i in range(0, 30, 6))
        qa[pid] = QACollection(pid, questions, tuple("yes" for _ in questions))

    reviews = []
    start = dt.date(2015, 1, 1)
    for i in range(n_reviews):
        pid = products[i % n_products]
        desc_vocab = descriptions[pid].description_text.replace(":", "").replace(".", "").split()
        q_vocab = " ".join(qa[pid].questions).replace("?", "").split()
        p_desc, p_q = rng.uniform(0.0, 0.45, size=2)
        sentences = []
        for _ in range(int(rng.integers(1, 7))):
            words = []
            for _ in range(int(rng.integers(3, 14))):
                u = rng.random()
                if u < p_desc:
                    words.append(desc_vocab[rng.integers(len(desc_vocab))])
                elif u < p_desc + p_q:
                    words.append(q_vocab[rng.integers(len(q_vocab))])
                else:
                    words.append(pool[rng.integers(len(pool))])
            sentences.append(" ".join(words).capitalize() + ".")
        reviews.append(
            Review(
                review_id=f"R{i:06d}",
                product_id=pid,
                date=start + dt.timedelta(days=int(rng.integers(0, 1500))),
                heading="",
                rating=int(rng.integers(1, 6)),
                text=" ".join(sentences),
                helpful_votes=0,
            )
        )

    corpus = build_corpus(reviews, descriptions, qa)
    signal = {}
    voted = []
    for r in corpus.reviews:
        row = review_feature_row(r, corpus.description_for(r.product_id), corpus.qa_for(r.product_id), lex)
        s = float(vote_fn(row))
        signal[r.review_id] = s
        votes = max(0, int(round(s + rng.normal(0.0, noise_sigma)))) if noise_sigma > 0 else max(0, int(round(s)))
        voted.append(Review(r.review_id, r.product_id, r.date, r.heading, r.rating, r.text, votes))
    corpus.reviews = voted
    return corpus, signal


def write_raw_inputs(corpus, directory) -> dict:
    """Write ``corpus`` as the three raw input files the ingest step reads.

    Returns ``{"reviews", "descriptions", "qa"}`` paths. Descriptions must be
    in the ``"name: value."`` form produced by :func:`generate_corpus`.
    """
    import csv
    import json
    from pathlib import Path

    from revrank.corpus_io import REVIEW_FIELDS

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {"reviews": d / "reviews.csv", "descriptions": d / "descriptions.jsonl", "qa": d / "qa.jsonl"}
    with paths["reviews"].open("w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REVIEW_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in corpus.reviews:
            w.writerow(r.to_dict())
    with paths["descriptions"].open("w", encoding="utf-8") as fh:
        for pid, desc in sorted(corpus.descriptions.items()):
            attrs = []
            for part in desc.description_text.split("."):
                if part.strip():
                    name, _, value = part.partition(":")
                    attrs.append({"name": name.strip(), "value": value.strip()})
            fh.write(json.dumps({"product_id": pid, "attributes": attrs}) + "\n")
    with paths["qa"].open("w", encoding="utf-8") as fh:
        for pid, q in sorted(corpus.qa.items()):
            for question, answer in zip(q.questions, q.answers):
                fh.write(json.dumps({"product_id": pid, "question": question, "answer": answer}) + "\n")
    return paths
