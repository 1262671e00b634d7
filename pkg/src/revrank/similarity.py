"""Binary bag-of-words cosine similarity between a review and product texts."""

from __future__ import annotations

import math

from revrank.text_features import word_tokens


def build_bow(text: str) -> frozenset[str]:
    """Distinct tokens of ``text`` (presence only)."""
    return frozenset(word_tokens(text))


def cosine_similarity(d1: frozenset, d2: frozenset) -> float:
    """``|d1 & d2| / sqrt(|d1| * |d2|)``; 0 when either side is empty."""
    if not d1 or not d2:
        return 0.0
    return len(d1 & d2) / math.sqrt(len(d1) * len(d2))


def desc_sim(review, desc) -> float:
    text = desc.description_text if desc is not None else ""
    return cosine_similarity(build_bow(text), build_bow(review.text))


def qa_sim(review, qa) -> float:
    # only the questions take part; answers are kept on the record but unused
    questions = qa.questions if qa is not None else ()
    if not questions:
        return 0.0
    return cosine_similarity(build_bow(" ".join(questions)), build_bow(review.text))
