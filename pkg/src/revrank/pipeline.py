"""End-to-end ranking with and without the quality classifier."""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from revrank._io import atomic_write_text
from revrank.dataset import (
    CASES,
    SMOTE_SCOPES,
    DegenerateClassError,
    as_matrix,
    balance,
    case_feature_names,
    case_mask,
    labeled_examples,
    review_feature_row,
    train_test_split,
)
from revrank.evaluation import EvalReport, classification_report, matching_at_k, mse
from revrank.learners import (
    check_feature_names,
    gb_fit,
    load_model,
    nb_fit,
    ols_fit,
    predict_proba,
    predict_score,
    rf_fit,
    save_model,
)
from revrank.text_features import load_lexicons

logger = logging.getLogger(__name__)

MODES = ("with_classifier", "without_classifier")
CLASSIFIERS = ("rf", "nb")
REGRESSORS = ("gb", "ols")

# offsets from the run seed for each random stream; split uses the seed itself
SMOTE_SEED_OFFSET = 1
CLASSIFIER_SEED_OFFSET = 2
REGRESSOR_SEED_OFFSET = 3


class ConfigError(ValueError):
    pass


class ModelMismatchError(ValueError):
    pass


@dataclass
class PipelineConfig:
    case: int = 4
    mode: str = "with_classifier"
    seed: int = 0
    k: int = 10
    smote_scope: str = "train_only"
    smote_k: int = 5
    normalize_for_knn: bool = True
    classifier: str = "rf"
    regressor: str = "gb"
    rf_n_trees: int = 100
    rf_max_features: int | None = None
    rf_max_depth: int | None = None
    rf_min_samples_leaf: int = 1
    gb_n_stages: int = 100
    gb_learning_rate: float = 0.1
    gb_max_depth: int = 3
    n_jobs: int = 1

    def validate(self) -> "PipelineConfig":
        if self.case not in CASES:
            raise ConfigError(f"case must be one of {CASES}, got {self.case!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.smote_scope not in SMOTE_SCOPES:
            raise ConfigError(f"smote_scope must be one of {SMOTE_SCOPES}")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"classifier must be one of {CLASSIFIERS}")
        if self.regressor not in REGRESSORS:
            raise ConfigError(f"regressor must be one of {REGRESSORS}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.smote_k < 1:
            raise ConfigError("smote_k must be >= 1")
        if self.rf_n_trees < 1 or self.gb_n_stages < 0 or self.gb_max_depth < 1:
            raise ConfigError("invalid ensemble size or depth")
        if not 0 < self.gb_learning_rate <= 1:
            raise ConfigError("gb_learning_rate must be in (0, 1]")
        if self.rf_max_features is not None and self.rf_max_features < 1:
            raise ConfigError("rf_max_features must be >= 1")
        if self.n_jobs < 1:
            raise ConfigError("n_jobs must be >= 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))


@dataclass
class RankedEntry:
    review_id: str
    predicted_score: float | None
    quality: str | None
    rank: int
    date_ordinal: int = 0

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "review_id": self.review_id,
            "predicted_score": self.predicted_score,
            "quality": self.quality,
        }


@dataclass
class RankedList:
    entries: list[RankedEntry]
    mode: str
    k: int
    matching: int | None = None
    config_echo: dict = field(default_factory=dict)

    @property
    def review_ids(self) -> list[str]:
        return [e.review_id for e in self.entries]

    def high_quality(self) -> list[RankedEntry]:
        return [e for e in self.entries if e.quality == "high"]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "k": self.k,
            "entries": [e.to_dict() for e in self.entries],
            "matching": self.matching,
            "config_echo": self.config_echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


@dataclass
class PipelineModels:
    classifier: object | None
    regressor: object | None
    case: int
    config: dict = field(default_factory=dict)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return case_feature_names(self.case)

    def save(self, directory) -> list[Path]:
        directory = Path(directory)
        meta = {"case": self.case, "config": self.config}
        written = []
        for name, model in (("classifier", self.classifier), ("regressor", self.regressor)):
            if model is None:
                continue
            path = directory / f"{name}.json"
            save_model(model, path, extra=meta)
            written.append(path)
        return written

    @classmethod
    def load(cls, directory, expected_case: int | None = None) -> "PipelineModels":
        directory = Path(directory)
        loaded, case, config = {}, None, {}
        for name in ("classifier", "regressor"):
            path = directory / f"{name}.json"
            if not path.exists():
                loaded[name] = None
                continue
            model, meta = load_model(path, with_metadata=True)
            model_case = meta.get("case")
            if case is not None and model_case != case:
                raise ModelMismatchError("classifier and regressor were trained on different cases")
            case = model_case
            config = meta.get("config", config)
            loaded[name] = model
        if case is None:
            raise ModelMismatchError(f"no model files in {directory}")
        if expected_case is not None and case != expected_case:
            raise ModelMismatchError(f"models were trained for case {case}, features are case {expected_case}")
        models = cls(loaded["classifier"], loaded["regressor"], case, config)
        for m in (models.classifier, models.regressor):
            if m is not None:
                try:
                    check_feature_names(m, models.feature_names)
                except ValueError as exc:
                    raise ModelMismatchError(str(exc)) from None
        return models


def _fit_classifier(config: PipelineConfig, X, y, names):
    if config.classifier == "nb":
        return nb_fit(X, y, feature_names=names)
    return rf_fit(
        X, y, config.rf_n_trees, config.rf_max_features, config.seed + CLASSIFIER_SEED_OFFSET,
        feature_names=names, max_depth=config.rf_max_depth,
        min_samples_leaf=config.rf_min_samples_leaf, n_jobs=config.n_jobs,
    )


def _fit_regressor(config: PipelineConfig, X, y, names):
    if config.regressor == "ols":
        if len(X) > X.shape[1]:
            return ols_fit(X, y, feature_names=names)
        logger.warning("too few rows for OLS (%d); falling back to gradient boosting", len(X))
    return gb_fit(
        X, y, config.gb_n_stages, config.gb_learning_rate, config.gb_max_depth,
        config.seed + REGRESSOR_SEED_OFFSET, feature_names=names,
    )


def _feature_matrix(corpus, case: int, lexicons=None) -> tuple[list, np.ndarray]:
    lex = lexicons or load_lexicons()
    mask = case_mask(case)
    reviews = sorted(corpus.reviews, key=lambda r: r.review_id)
    rows = [
        review_feature_row(r, corpus.description_for(r.product_id), corpus.qa_for(r.product_id), lex)
        for r in reviews
    ]
    X = np.array(rows, dtype=float)[:, mask] if rows else np.empty((0, len(mask)))
    return reviews, X


def actual_ranking(reviews) -> list[str]:
    """Review ids by observed votes, most votes first, newer first on ties."""
    ordered = sorted(reviews, key=lambda r: (-r.helpful_votes, -r.date.toordinal(), r.review_id))
    return [r.review_id for r in ordered]


def _order_entries(high, low, mode) -> list[RankedEntry]:
    high = sorted(high, key=lambda e: (-e.predicted_score, -e.date_ordinal, e.review_id))
    low = sorted(low, key=lambda e: (-e.date_ordinal, e.review_id))
    entries = high + low
    for i, e in enumerate(entries, start=1):
        e.rank = i
    return entries


def rank_corpus(corpus, models: PipelineModels, mode: str, k: int = 10, lexicons=None,
                features=None) -> RankedList:
    """Rank every review in ``corpus`` with already-fitted models.

    With the classifier, predicted low-quality reviews get no score and are
    appended newest first after all high-quality reviews.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    reviews, X = features if features is not None else _feature_matrix(corpus, models.case, lexicons)
    dates = [r.date.toordinal() for r in reviews]
    if mode == "with_classifier":
        if models.classifier is None:
            raise ModelMismatchError("with_classifier mode needs a classifier model")
        proba = predict_proba(models.classifier, X) if len(X) else np.empty(0)
        is_high = proba >= 0.5
    else:
        is_high = np.ones(len(reviews), dtype=bool)
    scores = np.full(len(reviews), np.nan)
    if is_high.any():
        if models.regressor is None:
            raise ModelMismatchError("no regressor available to score reviews")
        scores[is_high] = predict_score(models.regressor, X[is_high], clamp_at_zero=True)
    quality_of = (lambda h: "high" if h else "low") if mode == "with_classifier" else (lambda h: None)
    high, low = [], []
    for r, h, s, d in zip(reviews, is_high, scores, dates):
        entry = RankedEntry(r.review_id, float(s) if h else None, quality_of(h), 0, d)
        (high if h else low).append(entry)
    return RankedList(_order_entries(high, low, mode), mode, k)


def _matching(ranked: RankedList, reviews, k: int) -> tuple[int, int, bool]:
    """Overlap of predicted and actual top-k; returns (matching, k used, truncated)."""
    if ranked.mode == "with_classifier":
        candidates = [e.review_id for e in ranked.entries if e.quality == "high"]
    else:
        candidates = ranked.review_ids
    k_eff = min(k, len(reviews))
    truncated = len(candidates) < k_eff
    actual = actual_ranking(reviews)
    top = candidates[:k_eff]
    return len(set(top) & set(actual[:k_eff])), k_eff, truncated


def _matching_by_product(ranked: RankedList, corpus, k: int) -> dict[str, int]:
    by_product: dict[str, list] = {}
    for r in corpus.reviews:
        by_product.setdefault(r.product_id, []).append(r)
    pos = {e.review_id: i for i, e in enumerate(ranked.entries)}
    out = {}
    for pid, reviews in sorted(by_product.items()):
        ids = {r.review_id for r in reviews}
        sub = RankedList(
            [e for e in sorted(ranked.entries, key=lambda e: pos[e.review_id]) if e.review_id in ids],
            ranked.mode, k,
        )
        out[pid] = _matching(sub, reviews, k)[0]
    return out


def _finish(ranked, report, corpus, config):
    matching, k_eff, truncated = _matching(ranked, corpus.reviews, config.k)
    ranked.matching = matching
    ranked.config_echo = config.to_dict()
    report.matching = matching
    report.matching_k = k_eff
    report.matching_truncated = truncated
    if truncated:
        report.notes.append(
            f"fewer than k={k_eff} high-quality reviews; matching uses the shorter predicted list"
        )
    report.matching_by_product = _matching_by_product(ranked, corpus, config.k)
    report.config = config.to_dict()
    return ranked, report


def _split_matrices(examples):
    X, y = as_matrix(examples)
    votes = np.array([e.helpful_votes for e in examples], dtype=float)
    return X, y, votes


def run_with_classifier(corpus, config: PipelineConfig | None = None, lexicons=None):
    """Classify, regress on high-quality reviews only, and rank.

    The regressor trains on real (never synthetic) training examples
    labelled high-quality. Its MSE is measured on the real high-quality
    test examples. Returns ``(RankedList, EvalReport, PipelineModels)``.
    """
    config = dataclasses.replace(config or PipelineConfig(), mode="with_classifier").validate()
    names = case_feature_names(config.case)
    examples, thresholds = labeled_examples(corpus, config.case, lexicons)
    dataset = balance(
        examples, config.seed, scope=config.smote_scope, k=config.smote_k,
        normalize_for_knn=config.normalize_for_knn, thresholds=thresholds,
    )
    train, test = dataset.train, dataset.test
    X_train, y_train, _ = _split_matrices(train)
    classifier = _fit_classifier(config, X_train, y_train, names)

    X_test, y_test, _ = _split_matrices(test)
    report = classification_report(y_test, predict_proba(classifier, X_test))

    real_high = [e for e in train if not e.synthetic and e.label == 1]
    regressor = None
    if real_high:
        Xh, _, vh = _split_matrices(real_high)
        regressor = _fit_regressor(config, Xh, vh, names)
        test_high = [e for e in test if not e.synthetic and e.label == 1]
        if test_high:
            Xt, _, vt = _split_matrices(test_high)
            report.mse = mse(vt, predict_score(regressor, Xt, clamp_at_zero=True))
    else:
        report.notes.append("no real high-quality training examples; regressor not fitted")

    models = PipelineModels(classifier, regressor, config.case, config.to_dict())
    features = _feature_matrix(corpus, config.case, lexicons)
    if regressor is None:
        proba = predict_proba(classifier, features[1]) if len(features[1]) else np.empty(0)
        if np.any(proba >= 0.5):
            raise DegenerateClassError("classifier found high-quality reviews but no regressor could be fitted")
    ranked = rank_corpus(corpus, models, "with_classifier", config.k, lexicons, features)
    if not ranked.high_quality():
        logger.warning("every review classified low-quality; ranking is pure recency order")
        report.notes.append("all reviews classified low-quality; regressor output unused")
    return (*_finish(ranked, report, corpus, config), models)


def run_without_classifier(corpus, config: PipelineConfig | None = None, lexicons=None):
    """Regress on every real training review and rank all reviews by score.

    Returns ``(RankedList, EvalReport, PipelineModels)``. ``report.mse``
    covers the real high-quality test examples (the set the classifier run
    is scored on); ``report.mse_all_test`` covers the whole test split.
    """
    config = dataclasses.replace(config or PipelineConfig(), mode="without_classifier").validate()
    names = case_feature_names(config.case)
    examples, _ = labeled_examples(corpus, config.case, lexicons)
    try:
        train, test = train_test_split(examples, config.seed)
    except DegenerateClassError as exc:
        logger.warning("cannot split (%s); fitting the regressor on every review", exc)
        train, test = list(examples), []
    report = EvalReport()
    regressor = None
    if train:
        X_train, _, v_train = _split_matrices(train)
        regressor = _fit_regressor(config, X_train, v_train, names)
    if test:
        X_test, y_test, v_test = _split_matrices(test)
        pred = predict_score(regressor, X_test, clamp_at_zero=True)
        report.mse_all_test = mse(v_test, pred)
        high = y_test == 1
        if high.any():
            report.mse = mse(v_test[high], pred[high])
    else:
        report.notes.append("no test split; MSE not computed")
    models = PipelineModels(None, regressor, config.case, config.to_dict())
    ranked = rank_corpus(corpus, models, "without_classifier", config.k, lexicons) if regressor else RankedList([], config.mode, config.k)
    return (*_finish(ranked, report, corpus, config), models)


def rank_with_models(corpus, models: PipelineModels, config: PipelineConfig, lexicons=None):
    """Rank ``corpus`` with loaded models and score matching@k.

    Returns ``(RankedList, EvalReport)``; the report carries only the
    ranking fields.
    """
    config = config.validate()
    ranked = rank_corpus(corpus, models, config.mode, config.k, lexicons)
    return _finish(ranked, EvalReport(), corpus, config)


def evaluate_models(corpus, models: PipelineModels, config: PipelineConfig, lexicons=None) -> EvalReport:
    """Re-derive the held-out split for ``config`` and score loaded models on it.

    Mirrors the metrics of :func:`run_with_classifier` (or
    :func:`run_without_classifier` when ``models`` has no classifier) and
    adds matching@k over the whole corpus.
    """
    config = config.validate()
    examples, thresholds = labeled_examples(corpus, models.case, lexicons)
    if models.classifier is not None:
        dataset = balance(
            examples, config.seed, scope=config.smote_scope, k=config.smote_k,
            normalize_for_knn=config.normalize_for_knn, thresholds=thresholds,
        )
        test = dataset.test
        X_test, y_test, _ = _split_matrices(test)
        report = classification_report(y_test, predict_proba(models.classifier, X_test))
        test_high = [e for e in test if not e.synthetic and e.label == 1]
        if models.regressor is not None and test_high:
            Xt, _, vt = _split_matrices(test_high)
            report.mse = mse(vt, predict_score(models.regressor, Xt, clamp_at_zero=True))
    else:
        report = EvalReport()
        try:
            _, test = train_test_split(examples, config.seed)
        except DegenerateClassError:
            test = []
        if test and models.regressor is not None:
            X_test, y_test, v_test = _split_matrices(test)
            pred = predict_score(models.regressor, X_test, clamp_at_zero=True)
            report.mse_all_test = mse(v_test, pred)
            if (y_test == 1).any():
                report.mse = mse(v_test[y_test == 1], pred[y_test == 1])
        else:
            report.notes.append("no test split; MSE not computed")
    ranked = rank_corpus(corpus, models, config.mode, config.k, lexicons)
    _finish(ranked, report, corpus, config)
    return report


def split_manifest(corpus, config: PipelineConfig, lexicons=None) -> dict:
    """Train/test review ids exactly as a pipeline run with ``config`` splits them."""
    config = config.validate()
    examples, thresholds = labeled_examples(corpus, config.case, lexicons)
    if config.mode == "with_classifier":
        ds = balance(
            examples, config.seed, scope=config.smote_scope, k=config.smote_k,
            normalize_for_knn=config.normalize_for_knn, thresholds=thresholds,
        )
        train_ids, test_ids = ds.train_ids, ds.test_ids
    else:
        try:
            train, test = train_test_split(examples, config.seed)
        except DegenerateClassError:
            train, test = list(examples), []
        train_ids = [e.review_id for e in train]
        test_ids = [e.review_id for e in test]
    return {
        "seed": config.seed,
        "mode": config.mode,
        "smote_scope": config.smote_scope,
        "thresholds": {pid: thresholds[pid] for pid in sorted(thresholds)},
        "train_ids": train_ids,
        "test_ids": test_ids,
    }


def run_pipeline(corpus, config: PipelineConfig, lexicons=None):
    if config.mode == "with_classifier":
        return run_with_classifier(corpus, config, lexicons)
    return run_without_classifier(corpus, config, lexicons)


def score_new_review(models: PipelineModels, review, desc, qa, ranked: RankedList, lexicons=None):
    """Classify and score a fresh review against an existing ranking.

    Returns ``(quality, predicted_score, insertion_rank)``. High-quality
    reviews slot in by descending score, ahead of older entries with an
    equal score; low-quality reviews go straight after the last
    high-quality entry (they are the newest of the low-quality tail).
    """
    row = np.array(review_feature_row(review, desc, qa, lexicons), dtype=float)[case_mask(models.case)]
    for m in (models.classifier, models.regressor):
        if m is not None:
            try:
                check_feature_names(m, models.feature_names)
            except ValueError as exc:
                raise ModelMismatchError(str(exc)) from None
    if ranked.mode == "with_classifier":
        if models.classifier is None:
            raise ModelMismatchError("ranking was built with a classifier but none was supplied")
        is_high = predict_proba(models.classifier, row) >= 0.5
    else:
        is_high = True
    scored = [e for e in ranked.entries if e.predicted_score is not None]
    if not is_high:
        return "low", None, len(scored) + 1
    score = float(predict_score(models.regressor, row, clamp_at_zero=True))
    new_date = review.date.toordinal()
    ahead = sum(
        1 for e in scored
        if e.predicted_score > score or (e.predicted_score == score and e.date_ordinal > new_date)
    )
    quality = "high" if ranked.mode == "with_classifier" else None
    return quality, score, ahead + 1


def save_ranking(ranked: RankedList, path) -> None:
    atomic_write_text(path, ranked.to_json())
