import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revrank.corpus_io import build_corpus
from revrank.dataset import (
    FEATURE_NAMES,
    DatasetError,
    DegenerateClassError,
    FeatureVector,
    LabeledExample,
    assemble_features,
    balance,
    case_feature_names,
    features_csv,
    label_reviews,
    labeled_examples,
    product_thresholds,
    read_features_csv,
    smote_oversample,
    train_test_split,
)

from conftest import make_review


def _examples(labels, seed=0):
    """Case-1 examples whose features drift with the label."""
    rng = np.random.default_rng(seed)
    return [
        LabeledExample(f"e{i:04d}", _fv(rng.normal(size=15) + 3 * lab), lab, i % 7)
        for i, lab in enumerate(labels)
    ]


def _fv(values):
    return FeatureVector(tuple(float(v) for v in values), 1)


def _corpus_with_votes(votes, pid="P"):
    return build_corpus([make_review(f"{pid}{i}", pid, text=f"word{i} text", votes=v) for i, v in enumerate(votes)])


# -- features ---------------------------------------------------------------

def test_case_dimensions(tiny_corpus, lexicons):
    dims = {c: len(assemble_features(tiny_corpus, c, lexicons)[0][1].values) for c in (1, 2, 3, 4)}
    assert dims == {1: 15, 2: 16, 3: 16, 4: 17}
    assert case_feature_names(4) == FEATURE_NAMES


def test_case_masks_consistent(tiny_corpus, lexicons):
    full = dict(assemble_features(tiny_corpus, 4, lexicons))
    for rid, fv in assemble_features(tiny_corpus, 2, lexicons):
        assert fv.values == full[rid].values[:16]
    for rid, fv in assemble_features(tiny_corpus, 3, lexicons):
        assert fv.values == full[rid].values[:15] + full[rid].values[16:]
    for rid, fv in assemble_features(tiny_corpus, 1, lexicons):
        assert fv.values == full[rid].values[:15]


def test_feature_vector_dimension_checked():
    with pytest.raises(DatasetError):
        FeatureVector((1.0,) * 16, 4)


def test_features_sorted_by_id(tiny_corpus, lexicons):
    ids = [rid for rid, _ in assemble_features(tiny_corpus, 4, lexicons)]
    assert ids == sorted(ids)


# -- thresholds and labels --------------------------------------------------------

def test_threshold_and_labels():
    c = _corpus_with_votes([0, 0, 1, 5, 10])
    t = product_thresholds(c)
    assert t == {"P": pytest.approx(3.2)}
    labels = label_reviews(c, t)
    assert [labels[f"P{i}"] for i in range(5)] == [0, 0, 0, 1, 1]


def test_all_zero_and_single():
    c = _corpus_with_votes([0, 0, 0])
    assert product_thresholds(c) == {"P": 0.0}
    assert set(label_reviews(c, product_thresholds(c)).values()) == {0}
    assert product_thresholds(_corpus_with_votes([4])) == {"P": 4.0}


def test_vote_equal_to_threshold_is_low():
    c = _corpus_with_votes([2, 2, 2])
    assert set(label_reviews(c, product_thresholds(c)).values()) == {0}


def test_threshold_listed_product_without_reviews():
    with pytest.raises(DatasetError):
        product_thresholds(_corpus_with_votes([1]), products=["missing"])


@given(st.lists(st.integers(0, 50), min_size=1, max_size=20), st.integers(1, 100))
def test_labels_shift_invariant(votes, shift):
    a = _corpus_with_votes(votes)
    b = _corpus_with_votes([v + shift for v in votes])
    ta, tb = product_thresholds(a), product_thresholds(b)
    assert tb["P"] == pytest.approx(ta["P"] + shift)
    assert label_reviews(a, ta) == label_reviews(b, tb)


# -- split -------------------------------------------------------------------------

def test_split_100_balanced():
    ex = _examples([0] * 50 + [1] * 50)
    train, test = train_test_split(ex, seed=1)
    assert (len(train), len(test)) == (75, 25)
    per_class = sorted(sum(e.label == c for e in train) for c in (0, 1))
    assert per_class == [37, 38]
    assert not {e.review_id for e in train} & {e.review_id for e in test}


def test_split_four():
    train, test = train_test_split(_examples([0, 0, 1, 1]), seed=0)
    assert (len(train), len(test)) == (3, 1)


def test_split_deterministic():
    ex = _examples([0] * 30 + [1] * 10)
    assert train_test_split(ex, 5) == train_test_split(ex, 5)


def test_split_seeds_differ():
    ex = _examples([0] * 50 + [1] * 50)
    parts = {tuple(e.review_id for e in train_test_split(ex, s)[0]) for s in range(100)}
    assert len(parts) >= 99


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.integers(2, 60), st.integers(0, 1000))
def test_split_properties(n0, n1, seed):
    ex = _examples([0] * n0 + [1] * n1)
    train, test = train_test_split(ex, seed)
    n = n0 + n1
    assert len(train) == math.floor(0.75 * n)
    assert len(train) + len(test) == n
    for c, nc in ((0, n0), (1, n1)):
        tr = sum(e.label == c for e in train)
        # tiny classes may fill their training quota completely (4 examples -> 3/1)
        assert 1 <= tr <= nc
        assert abs(tr - 0.75 * nc) <= 1.0 + 1e-9


def test_split_errors():
    with pytest.raises(DegenerateClassError):
        train_test_split(_examples([0, 1, 1]), 0)
    with pytest.raises(DegenerateClassError):
        train_test_split(_examples([0] * 10 + [1]), 0)


# -- SMOTE ----------------------------------------------------------------------------

def test_smote_zero_target():
    pts = np.array([[0.0, 0.0], [1.0, 1.0]])
    out = smote_oversample(pts, k=1, target_n=0)
    assert out.shape == (0, 2)
    assert pts.tolist() == [[0.0, 0.0], [1.0, 1.0]]


def test_smote_midpoint():
    out = smote_oversample(np.array([[0.0, 0.0], [2.0, 2.0]]), k=1, target_n=3, gamma=0.5)
    assert out.tolist() == [[1.0, 1.0]] * 3


def test_smote_errors():
    with pytest.raises(DegenerateClassError):
        smote_oversample(np.zeros((1, 2)), k=1, target_n=2)
    with pytest.raises(DatasetError):
        smote_oversample(np.zeros((3, 2)), k=3, target_n=2)
    with pytest.raises(DatasetError):
        smote_oversample(np.zeros((3, 2)), k=0, target_n=2)


def test_smote_count_and_determinism():
    pts = np.random.default_rng(0).normal(size=(12, 4))
    a = smote_oversample(pts, k=5, target_n=37, seed=9)
    assert a.shape == (37, 4)
    assert np.array_equal(a, smote_oversample(pts, k=5, target_n=37, seed=9))
    assert not np.array_equal(a, smote_oversample(pts, k=5, target_n=37, seed=10))


def segment_parents(points, synthetic, tol=1e-9):
    """For each synthetic row, True if it lies on a segment between two real rows."""
    ok = np.zeros(len(synthetic), dtype=bool)
    n = len(points)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            a, d = points[i], points[j] - points[i]
            nz = np.abs(d) > 1e-12
            if not nz.any():
                continue
            lam = ((synthetic - a)[:, nz] / d[nz]).mean(axis=1)
            recon = a + lam[:, None] * d
            hit = (lam >= -tol) & (lam <= 1 + tol) & np.all(np.abs(recon - synthetic) <= tol * (1 + np.abs(synthetic)), axis=1)
            ok |= hit
    return ok


def test_smote_points_on_segments():
    pts = np.random.default_rng(2).normal(size=(15, 3)) * [1.0, 100.0, 0.01]
    syn = smote_oversample(pts, k=4, target_n=500, seed=3)
    assert segment_parents(pts, syn).all()
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    assert np.all((syn >= lo - 1e-12) & (syn <= hi + 1e-12))


def test_smote_neighbours_use_scaling():
    # from the origin: raw nearest is (2, 0), after min-max scaling it is (0, 3)
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 3.0], [10.0, 30.0]])
    raw = smote_oversample(pts, k=1, target_n=4, seed=0, normalize_for_knn=False, gamma=1.0)
    scaled = smote_oversample(pts, k=1, target_n=4, seed=0, normalize_for_knn=True, gamma=1.0)
    assert not np.array_equal(raw, scaled)


# -- balance ---------------------------------------------------------------------------

def test_balance_pre_split_equal_counts():
    ex = _examples([0] * 60 + [1] * 14)
    ds = balance(ex, seed=4, scope="pre_split")
    labels = [e.label for e in ds.examples]
    assert labels.count(0) == labels.count(1) == 60
    assert sum(e.synthetic for e in ds.examples) == 46
    assert any(e.synthetic for e in ds.test)


def test_balance_train_only():
    ex = _examples([0] * 60 + [1] * 14)
    ds = balance(ex, seed=4, scope="train_only")
    train_labels = [e.label for e in ds.train]
    assert train_labels.count(0) == train_labels.count(1)
    assert not any(e.synthetic for e in ds.test)
    assert not set(ds.train_ids) & set(ds.test_ids)


def test_balance_large_imbalance_count():
    ex = [LabeledExample(f"e{i:05d}", _fv(np.full(15, float(i % 97))), int(i >= 24958), 0)
          for i in range(24958 + 2232)]
    ds = balance(ex, seed=0, scope="pre_split", k=5)
    assert sum(e.synthetic for e in ds.examples) == 22726


def test_balance_already_balanced():
    ex = _examples([0] * 20 + [1] * 20)
    ds = balance(ex, seed=0, scope="pre_split")
    assert not any(e.synthetic for e in ds.examples)


def test_balance_small_class_errors():
    with pytest.raises(DegenerateClassError):
        balance(_examples([0] * 10), seed=0)
    with pytest.raises(DegenerateClassError):
        balance(_examples([0] * 10 + [1]), seed=0, scope="pre_split")


def test_balance_clamps_k():
    ds = balance(_examples([0] * 30 + [1] * 3), seed=0, scope="pre_split", k=5)
    assert sum(e.synthetic for e in ds.examples) == 27


def test_synthetic_ids_not_from_corpus():
    ex = _examples([0] * 30 + [1] * 6)
    ds = balance(ex, seed=0, scope="pre_split")
    real = {e.review_id for e in ex}
    for e in ds.examples:
        if e.synthetic:
            assert e.review_id.startswith("smote-") and e.review_id not in real and e.label == 1


# -- CSV ---------------------------------------------------------------------------------

def test_features_csv_round_trip(tmp_path, tiny_corpus, lexicons):
    rows = assemble_features(tiny_corpus, 3, lexicons)
    text = features_csv(rows, 3)
    assert text.splitlines()[0].split(",") == ["review_id", *case_feature_names(3)]
    (tmp_path / "f.csv").write_text(text)
    case, back = read_features_csv(tmp_path / "f.csv")
    assert case == 3 and back == rows


def test_labeled_csv_round_trip(tmp_path, tiny_corpus, lexicons):
    examples, _ = labeled_examples(tiny_corpus, 4, lexicons)
    (tmp_path / "f.csv").write_text(features_csv(examples, 4))
    _, back = read_features_csv(tmp_path / "f.csv")
    assert [(e.review_id, e.label, e.helpful_votes, e.features) for e in back] == \
        [(e.review_id, e.label, e.helpful_votes, e.features) for e in examples]
