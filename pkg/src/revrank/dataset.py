"""Feature assembly, threshold labelling, stratified splitting and SMOTE."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from revrank.similarity import desc_sim, qa_sim
from revrank.text_features import TEXT_FEATURE_NAMES, extract_text_features, load_lexicons

FEATURE_NAMES = TEXT_FEATURE_NAMES + ("desc_sim", "qa_sim")
CASES = (1, 2, 3, 4)
SMOTE_SCOPES = ("train_only", "pre_split")
TRAIN_FRACTION = 0.75


class DatasetError(ValueError):
    pass


class DegenerateClassError(DatasetError):
    """A class is too small for splitting or oversampling."""


def case_feature_names(case: int) -> tuple[str, ...]:
    if case == 1:
        return TEXT_FEATURE_NAMES
    if case == 2:
        return TEXT_FEATURE_NAMES + ("desc_sim",)
    if case == 3:
        return TEXT_FEATURE_NAMES + ("qa_sim",)
    if case == 4:
        return FEATURE_NAMES
    raise DatasetError(f"unknown case {case!r}; expected one of 1, 2, 3, 4")


def case_mask(case: int) -> list[int]:
    names = case_feature_names(case)
    return [FEATURE_NAMES.index(n) for n in names]


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    case: int

    def __post_init__(self):
        if len(self.values) != len(case_feature_names(self.case)):
            raise DatasetError(
                f"case {self.case} expects {len(case_feature_names(self.case))} features, "
                f"got {len(self.values)}"
            )

    @property
    def names(self) -> tuple[str, ...]:
        return case_feature_names(self.case)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class LabeledExample:
    review_id: str
    features: FeatureVector
    label: int
    helpful_votes: int
    synthetic: bool = False
    product_id: str = ""


@dataclass
class LabeledDataset:
    examples: list[LabeledExample]
    thresholds: dict[str, float] = field(default_factory=dict)
    train_ids: list[str] = field(default_factory=list)
    test_ids: list[str] = field(default_factory=list)
    seed: int = 0
    smote_scope: str = "train_only"

    @property
    def case(self) -> int:
        return self.examples[0].features.case

    def _select(self, ids) -> list[LabeledExample]:
        by_id = {e.review_id: e for e in self.examples}
        return [by_id[i] for i in ids]

    @property
    def train(self) -> list[LabeledExample]:
        return self._select(self.train_ids)

    @property
    def test(self) -> list[LabeledExample]:
        return self._select(self.test_ids)


def as_matrix(examples) -> tuple[np.ndarray, np.ndarray]:
    """Stack examples into ``(X, y)``."""
    if not examples:
        return np.empty((0, 0)), np.empty(0, dtype=int)
    X = np.array([e.features.values for e in examples], dtype=float)
    y = np.array([e.label for e in examples], dtype=int)
    return X, y


def review_feature_row(review, desc, qa, lexicons=None) -> tuple[float, ...]:
    """Full 17-feature row for one review, in :data:`FEATURE_NAMES` order."""
    text = extract_text_features(review, lexicons).as_tuple()
    return tuple(float(v) for v in text) + (desc_sim(review, desc), qa_sim(review, qa))


def assemble_features(corpus, case: int, lexicons=None) -> list[tuple[str, FeatureVector]]:
    """Feature vectors for every review, ordered by review_id."""
    mask = case_mask(case)
    lex = lexicons or load_lexicons()
    out = []
    for review in sorted(corpus.reviews, key=lambda r: r.review_id):
        row = review_feature_row(
            review, corpus.description_for(review.product_id), corpus.qa_for(review.product_id), lex
        )
        out.append((review.review_id, FeatureVector(tuple(row[i] for i in mask), case)))
    return out


def product_thresholds(corpus, products=None) -> dict[str, float]:
    """Mean helpful votes per product.

    When ``products`` is given, every listed product must have reviews.
    """
    votes: dict[str, list[int]] = {}
    for r in corpus.reviews:
        votes.setdefault(r.product_id, []).append(r.helpful_votes)
    for pid in products or ():
        if pid not in votes:
            raise DatasetError(f"product {pid!r} has no reviews")
    return {pid: math.fsum(v) / len(v) for pid, v in sorted(votes.items())}


def label_reviews(corpus, thresholds: dict[str, float]) -> dict[str, int]:
    """1 when a review's votes strictly exceed its product threshold."""
    return {r.review_id: int(r.helpful_votes > thresholds[r.product_id]) for r in corpus.reviews}


def labeled_examples(corpus, case: int, lexicons=None) -> tuple[list[LabeledExample], dict[str, float]]:
    thresholds = product_thresholds(corpus)
    labels = label_reviews(corpus, thresholds)
    reviews = {r.review_id: r for r in corpus.reviews}
    examples = [
        LabeledExample(
            review_id=rid,
            features=fv,
            label=labels[rid],
            helpful_votes=reviews[rid].helpful_votes,
            product_id=reviews[rid].product_id,
        )
        for rid, fv in assemble_features(corpus, case, lexicons)
    ]
    return examples, thresholds


def train_test_split(examples, seed: int, train_fraction: float = TRAIN_FRACTION):
    """Stratified seeded split; returns ``(train, test)`` lists.

    ``floor(train_fraction * n)`` examples go to training. Per-class quotas
    take the floor of their exact share and the remainder goes to the
    classes with the largest fractional parts (lower label first on ties).
    Each class keeps at least one training example.
    """
    n = len(examples)
    if n < 4:
        raise DegenerateClassError(f"need at least 4 examples to split, got {n}")
    by_class: dict[int, list] = {}
    for e in examples:
        by_class.setdefault(e.label, []).append(e)
    small = {c: len(v) for c, v in by_class.items() if len(v) < 2}
    if small:
        raise DegenerateClassError(f"class(es) too small to appear on both sides: {small}")

    n_train = math.floor(train_fraction * n)
    labels = sorted(by_class)
    exact = {c: train_fraction * len(by_class[c]) for c in labels}
    quota = {c: max(1, math.floor(exact[c])) for c in labels}
    remainder = n_train - sum(quota.values())
    for c in sorted(labels, key=lambda c: (-(exact[c] - math.floor(exact[c])), c)):
        if remainder <= 0:
            break
        if quota[c] < len(by_class[c]):
            quota[c] += 1
            remainder -= 1

    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in labels:
        members = sorted(by_class[c], key=lambda e: e.review_id)
        order = rng.permutation(len(members))
        shuffled = [members[i] for i in order]
        train.extend(shuffled[: quota[c]])
        test.extend(shuffled[quota[c]:])
    train.sort(key=lambda e: e.review_id)
    test.sort(key=lambda e: e.review_id)
    return train, test


def _neighbour_table(points: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest other points (Euclidean, stable on ties)."""
    n = len(points)
    sq = np.einsum("ij,ij->i", points, points)
    out = np.empty((n, k), dtype=np.int64)
    chunk = max(1, 4_000_000 // max(n, 1))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        d = sq[start:stop, None] + sq[None, :] - 2.0 * points[start:stop] @ points.T
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def smote_oversample(
    minority,
    k: int = 5,
    target_n: int = 0,
    seed: int = 0,
    *,
    normalize_for_knn: bool = True,
    gamma: float | None = None,
) -> np.ndarray:
    """Generate ``target_n`` synthetic minority points.

    Base points are visited round-robin over a seeded shuffle; each one is
    paired with a uniformly chosen member of its ``k`` nearest minority
    neighbours and a point is drawn on the segment between them. Neighbour
    search optionally runs on min-max scaled features, interpolation always
    happens in the raw space. ``gamma`` pins the interpolation weight (used
    by tests).
    """
    points = np.asarray(minority, dtype=float)
    if points.ndim != 2:
        points = points.reshape(len(points), -1)
    n = len(points)
    if n < 2:
        raise DegenerateClassError(f"SMOTE needs at least 2 minority points, got {n}")
    if not 1 <= k <= n - 1:
        raise DatasetError(f"k={k} out of range for {n} minority points (1..{n - 1})")
    if target_n <= 0:
        return np.empty((0, points.shape[1]))

    search = points
    if normalize_for_knn:
        lo, hi = points.min(axis=0), points.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        search = (points - lo) / span
    neighbours = _neighbour_table(search, k)

    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    base = order[np.arange(target_n) % n]
    pick = neighbours[base, rng.integers(0, k, size=target_n)]
    weights = np.full(target_n, gamma) if gamma is not None else rng.random(target_n)
    return points[base] + weights[:, None] * (points[pick] - points[base])


def _synthetic_examples(real, n_new, seed, k, normalize_for_knn, prefix):
    label = real[0].label
    case = real[0].features.case
    X = np.array([e.features.values for e in real], dtype=float)
    k_eff = min(k, len(real) - 1)
    pts = smote_oversample(X, k_eff, n_new, seed, normalize_for_knn=normalize_for_knn)
    return [
        LabeledExample(
            review_id=f"{prefix}{i:06d}",
            features=FeatureVector(tuple(float(v) for v in row), case),
            label=label,
            helpful_votes=0,
            synthetic=True,
        )
        for i, row in enumerate(pts)
    ]


def _oversample_minority(examples, seed, k, normalize_for_knn, prefix):
    counts = {0: [], 1: []}
    for e in examples:
        counts[e.label].append(e)
    if not counts[0] or not counts[1]:
        raise DegenerateClassError("both classes must be present to balance")
    minority_label = 1 if len(counts[1]) < len(counts[0]) else 0
    n_new = abs(len(counts[1]) - len(counts[0]))
    if n_new == 0:
        return []
    minority = counts[minority_label]
    if len(minority) < 2:
        raise DegenerateClassError(f"class {minority_label} has fewer than 2 members")
    return _synthetic_examples(minority, n_new, seed, k, normalize_for_knn, prefix)


def balance(
    examples,
    seed: int,
    *,
    scope: str = "train_only",
    k: int = 5,
    normalize_for_knn: bool = True,
    thresholds: dict | None = None,
) -> LabeledDataset:
    """Split and SMOTE-balance ``examples``.

    ``pre_split`` oversamples the whole set and then splits it, so synthetic
    points land in both partitions. ``train_only`` splits the real examples
    first and balances the training partition alone.

    Seed streams: the split uses ``seed``, SMOTE uses ``seed + 1``.
    """
    if scope not in SMOTE_SCOPES:
        raise DatasetError(f"unknown smote scope {scope!r}")
    examples = list(examples)
    if scope == "pre_split":
        synthetic = _oversample_minority(examples, seed + 1, k, normalize_for_knn, "smote-")
        train, test = train_test_split(examples + synthetic, seed)
    else:
        train, test = train_test_split(examples, seed)
        synthetic = _oversample_minority(train, seed + 1, k, normalize_for_knn, "smote-")
        train = sorted(train + synthetic, key=lambda e: e.review_id)
    return LabeledDataset(
        examples=examples + synthetic,
        thresholds=dict(thresholds or {}),
        train_ids=[e.review_id for e in train],
        test_ids=[e.review_id for e in test],
        seed=seed,
        smote_scope=scope,
    )


def features_csv(rows, case: int, labels=None) -> str:
    """Serialise feature rows to CSV text.

    ``rows`` holds ``(review_id, FeatureVector)`` pairs or
    :class:`LabeledExample` objects; label columns appear only for the latter.
    """
    names = case_feature_names(case)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    labeled = bool(rows) and isinstance(rows[0], LabeledExample)
    header = ["review_id", *names]
    if labeled:
        header += ["label", "helpful_votes", "synthetic"]
    writer.writerow(header)
    for row in rows:
        if labeled:
            writer.writerow(
                [row.review_id, *(repr(float(v)) for v in row.features.values),
                 row.label, row.helpful_votes, int(row.synthetic)]
            )
        else:
            rid, fv = row
            writer.writerow([rid, *(repr(float(v)) for v in fv.values)])
    return buf.getvalue()


def read_features_csv(path) -> tuple[int, list]:
    """Inverse of :func:`features_csv`; returns ``(case, rows)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        labeled = header[-3:] == ["label", "helpful_votes", "synthetic"]
        names = tuple(header[1:-3] if labeled else header[1:])
        case = next((c for c in CASES if case_feature_names(c) == names), None)
        if case is None:
            raise DatasetError(f"{path}: feature columns do not match any case")
        rows = []
        for rec in reader:
            fv = FeatureVector(tuple(float(v) for v in rec[1:1 + len(names)]), case)
            if labeled:
                label, votes, synth = rec[1 + len(names):]
                rows.append(LabeledExample(rec[0], fv, int(label), int(votes), bool(int(synth))))
            else:
                rows.append((rec[0], fv))
    return case, rows


def with_label(example: LabeledExample, label: int) -> LabeledExample:
    return replace(example, label=label)
