"""Review-text features: POS counts, readability, lexical statistics, entropy."""

from __future__ import annotations

import math
import os
import re
from collections import Counter
from dataclasses import astuple, dataclass, fields
from functools import lru_cache
from pathlib import Path

_SENTENCE_END = re.compile(r"[.!?]")
_TOKEN = re.compile(r"[A-Za-z0-9]+")
_VOWEL_GROUP = re.compile(r"[aeiouy]+")
_VOWELS = frozenset("aeiouy")

DATA_DIR_ENV = "REVRANK_DATA_DIR"
POS_LEXICON_FILE = "pos_lexicon.tsv"
FAMILIAR_WORDS_FILE = "familiar_words.txt"
ENGLISH_WORDS_FILE = "english_words.txt"

NOUN, ADJ, VERB, ADV, NUM = "NOUN", "ADJ", "VERB", "ADV", "NUM"

# checked in order; first match wins
SUFFIX_RULES = (
    ("ly", ADV),
    ("ing", VERB),
    ("ed", VERB),
    ("ous", ADJ),
    ("ful", ADJ),
    ("able", ADJ),
    ("ive", ADJ),
)


class TextFeatureError(ValueError):
    pass


@dataclass(frozen=True)
class TokenStream:
    tokens: tuple[str, ...]
    sentences: tuple[tuple[int, int], ...]

    def __len__(self):
        return len(self.tokens)

    def sentence_tokens(self, i: int) -> tuple[str, ...]:
        start, end = self.sentences[i]
        return self.tokens[start:end]


@dataclass(frozen=True)
class TextFeatureSet:
    noun: int
    adjective: int
    verb: int
    flesch_reading_ease: float
    dale_chall_re: float
    difficult_words: int
    length: int
    set_length: int
    wrong_words: int
    one_letter_words: int
    two_letter_words: int
    longer_letter_words: int
    lex_diversity: float
    entropy: float
    rating: int

    def as_tuple(self) -> tuple:
        return astuple(self)


TEXT_FEATURE_NAMES = tuple(f.name for f in fields(TextFeatureSet))


def tokenize(text: str) -> TokenStream:
    """Split on ``.``, ``!`` and ``?`` then take lowercased alphanumeric runs.

    Sentences without tokens are discarded. Raises
    :class:`TextFeatureError` when the text has no tokens at all.
    """
    tokens: list[str] = []
    sentences: list[tuple[int, int]] = []
    for chunk in _SENTENCE_END.split(text):
        words = [w.lower() for w in _TOKEN.findall(chunk)]
        if not words:
            continue
        sentences.append((len(tokens), len(tokens) + len(words)))
        tokens.extend(words)
    if not tokens:
        raise TextFeatureError(f"no tokens in text {text[:40]!r}")
    return TokenStream(tuple(tokens), tuple(sentences))


def word_tokens(text: str) -> list[str]:
    """Tokens of ``text`` without sentence bookkeeping; empty text gives []."""
    return [w.lower() for w in _TOKEN.findall(text)]


# -- bundled word lists ------------------------------------------------------


def default_data_dir() -> Path:
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    return Path(__file__).resolve().parent / "data"


def _read_word_list(path: Path) -> frozenset[str]:
    if not path.is_file():
        raise FileNotFoundError(f"word list not found: {path}")
    with path.open(encoding="utf-8") as fh:
        return frozenset(line.strip().lower() for line in fh if line.strip())


def _read_pos_lexicon(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise FileNotFoundError(f"POS lexicon not found: {path}")
    lexicon = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                word, tag = line.split("\t")
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'token<TAB>tag'") from None
            lexicon[word.lower()] = tag.upper()
    return lexicon


@dataclass(frozen=True)
class Lexicons:
    pos: dict
    familiar: frozenset
    english: frozenset


@lru_cache(maxsize=8)
def _load_lexicons(pos_path: Path, familiar_path: Path, english_path: Path) -> Lexicons:
    return Lexicons(
        pos=_read_pos_lexicon(pos_path),
        familiar=_read_word_list(familiar_path),
        english=_read_word_list(english_path),
    )


def load_lexicons(data_dir=None, *, pos_lexicon=None, familiar_words=None, english_words=None) -> Lexicons:
    """Load (once) the tagger lexicon, Dale-Chall list and English dictionary.

    Individual paths override files in ``data_dir``; ``data_dir`` defaults to
    ``$REVRANK_DATA_DIR`` or the copies shipped with the package.
    """
    base = Path(data_dir) if data_dir else default_data_dir()
    return _load_lexicons(
        Path(pos_lexicon or base / POS_LEXICON_FILE).resolve(),
        Path(familiar_words or base / FAMILIAR_WORDS_FILE).resolve(),
        Path(english_words or base / ENGLISH_WORDS_FILE).resolve(),
    )


# -- individual features -----------------------------------------------------


def tag_token(token: str, lexicon: dict) -> str:
    tag = lexicon.get(token)
    if tag is not None:
        return tag
    if token.isdigit():
        return NUM
    for suffix, suffix_tag in SUFFIX_RULES:
        if token.endswith(suffix) and len(token) > len(suffix):
            return suffix_tag
    return NOUN


def pos_counts(stream: TokenStream, lexicon: dict | None = None) -> tuple[int, int, int]:
    """Return ``(noun, adjective, verb)`` counts from the rule-based tagger."""
    if lexicon is None:
        lexicon = load_lexicons().pos
    tags = Counter(tag_token(t, lexicon) for t in stream.tokens)
    return tags[NOUN], tags[ADJ], tags[VERB]


def syllable_count(token: str) -> int:
    """Vowel-group syllable estimate, at least 1.

    A final ``e`` is silent in the vowel-consonant-e pattern where the vowel
    is a single letter (``make``, ``hope``) but not after a digraph
    (``create``) or a consonant cluster (``table``).
    """
    word = token.lower()
    if word.isdigit():
        return 1
    groups = _VOWEL_GROUP.findall(word)
    count = len(groups)
    n = len(word)
    if (
        count > 1
        and n >= 3
        and word[-1] == "e"
        and word[-2] not in _VOWELS
        and word[-3] in _VOWELS
        and (n == 3 or word[-4] not in _VOWELS)
    ):
        count -= 1
    return max(count, 1)


def _require_text(stream: TokenStream) -> None:
    if not stream.tokens or not stream.sentences:
        raise TextFeatureError("readability needs at least one sentence and one token")


def flesch_reading_ease(stream: TokenStream) -> float:
    _require_text(stream)
    words = len(stream.tokens)
    syllables = sum(syllable_count(t) for t in stream.tokens)
    return 206.835 - 1.015 * (words / len(stream.sentences)) - 84.6 * (syllables / words)


def dale_chall_score(stream: TokenStream, familiar: frozenset | None = None) -> tuple[float, int]:
    """Return ``(score, difficult_words)``; each unfamiliar token occurrence counts."""
    _require_text(stream)
    if familiar is None:
        familiar = load_lexicons().familiar
    words = len(stream.tokens)
    difficult = sum(t not in familiar for t in stream.tokens)
    pct = 100.0 * difficult / words
    score = 0.1579 * pct + 0.0496 * (words / len(stream.sentences))
    if pct > 5:
        score += 3.6365
    return score, difficult


def lexical_stats(stream: TokenStream) -> tuple[int, int, int, int, int, float]:
    """``(length, set_length, one_letter, two_letter, longer, lex_diversity)``."""
    length = len(stream.tokens)
    set_length = len(set(stream.tokens))
    one = sum(len(t) == 1 for t in stream.tokens)
    two = sum(len(t) == 2 for t in stream.tokens)
    return length, set_length, one, two, length - one - two, set_length / length


def wrong_words_count(stream: TokenStream, dictionary: frozenset | None = None) -> int:
    if dictionary is None:
        dictionary = load_lexicons().english
    return sum(not t.isdigit() and t not in dictionary for t in stream.tokens)


def word_entropy(stream: TokenStream) -> float:
    """Shannon entropy (bits) of the token frequency distribution."""
    n = len(stream.tokens)
    h = 0.0
    for c in Counter(stream.tokens).values():
        p = c / n
        h -= p * math.log2(p)
    # avoid -0.0 for a single repeated token
    return h + 0.0


def extract_text_features(review, lexicons: Lexicons | None = None) -> TextFeatureSet:
    """All 15 review-text features for one cleaned review."""
    lex = lexicons or load_lexicons()
    stream = tokenize(review.text)
    noun, adjective, verb = pos_counts(stream, lex.pos)
    dale, difficult = dale_chall_score(stream, lex.familiar)
    length, set_length, one, two, longer, diversity = lexical_stats(stream)
    return TextFeatureSet(
        noun=noun,
        adjective=adjective,
        verb=verb,
        flesch_reading_ease=flesch_reading_ease(stream),
        dale_chall_re=dale,
        difficult_words=difficult,
        length=length,
        set_length=set_length,
        wrong_words=wrong_words_count(stream, lex.english),
        one_letter_words=one,
        two_letter_words=two,
        longer_letter_words=longer,
        lex_diversity=diversity,
        entropy=word_entropy(stream),
        rating=int(review.rating),
    )
