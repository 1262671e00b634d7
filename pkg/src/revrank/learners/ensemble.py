"""Random forest classifier and gradient-boosted regression trees."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from revrank.learners.tree import Tree, fit_tree


class ModelInputError(ValueError):
    pass


def _as_2d(model_dim: int, x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != model_dim:
        raise ModelInputError(f"expected {model_dim} features, got shape {np.shape(x)}")
    return arr, single


def default_max_features(n_features: int) -> int:
    return max(1, math.isqrt(n_features))


@dataclass
class RandomForestModel:
    trees: list[Tree]
    n_trees: int
    max_features: int
    seed: int
    feature_names: tuple[str, ...]
    max_depth: int | None = None
    min_samples_leaf: int = 1
    bootstrap: bool = True

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def hyperparams(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_features": self.max_features,
            "seed": self.seed,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "bootstrap": self.bootstrap,
        }


def _fit_forest_tree(X, y, i, seed, max_features, max_depth, min_samples_leaf, bootstrap):
    rng = np.random.default_rng(seed + i)
    if bootstrap:
        rows = rng.integers(0, len(X), size=len(X))
        Xb, yb = X[rows], y[rows]
    else:
        Xb, yb = X, y
    return fit_tree(
        Xb, yb, "gini", max_depth, min_samples_leaf, max_features, rng
    )


def rf_fit(
    X,
    y,
    n_trees: int = 100,
    max_features: int | None = None,
    seed: int = 0,
    *,
    feature_names=None,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    bootstrap: bool = True,
    n_jobs: int = 1,
) -> RandomForestModel:
    """Fit a bagged forest of Gini trees.

    Tree ``i`` draws its bootstrap sample and feature subsets from
    ``default_rng(seed + i)``, so parallel and sequential fits agree.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if len(np.unique(y)) < 2:
        raise ModelInputError("random forest needs both classes in the training data")
    if not set(np.unique(y)) <= {0, 1}:
        raise ModelInputError("labels must be 0/1")
    d = X.shape[1]
    max_features = default_max_features(d) if max_features is None else int(max_features)
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{i}" for i in range(d))
    if len(names) != d:
        raise ModelInputError("feature_names length does not match X")
    def one(i):
        return _fit_forest_tree(X, y, i, seed, max_features, max_depth, min_samples_leaf, bootstrap)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(one, range(n_trees)))
    else:
        trees = [one(i) for i in range(n_trees)]
    return RandomForestModel(
        trees, n_trees, max_features, seed, names, max_depth, min_samples_leaf, bootstrap
    )


def rf_predict_proba(model: RandomForestModel, x):
    """Mean over trees of the leaf class-1 fraction."""
    X, single = _as_2d(model.n_features, x)
    proba = np.zeros(len(X))
    for tree in model.trees:
        proba += tree.predict_value(X)
    proba /= len(model.trees)
    return float(proba[0]) if single else proba


def rf_predict(model: RandomForestModel, x):
    proba = rf_predict_proba(model, x)
    return int(proba >= 0.5) if np.isscalar(proba) else (proba >= 0.5).astype(int)


@dataclass
class GradientBoostedModel:
    init_value: float
    trees: list[Tree]
    learning_rate: float
    n_stages: int
    max_depth: int
    seed: int
    feature_names: tuple[str, ...]
    min_samples_leaf: int = 1
    train_loss: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def hyperparams(self) -> dict:
        return {
            "n_stages": self.n_stages,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "seed": self.seed,
        }


def gb_fit(
    X,
    y,
    n_stages: int = 100,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    seed: int = 0,
    *,
    feature_names=None,
    min_samples_leaf: int = 1,
) -> GradientBoostedModel:
    """Least-squares boosting: each stage fits a variance tree to residuals.

    ``train_loss[s]`` is the training MSE after ``s`` stages. Every feature
    is considered at every split, so ``seed`` has no effect on the fit and
    is only recorded.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ModelInputError("gb_fit needs a non-empty 2-D feature matrix")
    if len(y) != len(X):
        raise ModelInputError("X and y lengths differ")
    if not np.isfinite(y).all():
        raise ModelInputError("targets must be finite")
    if not 0 < learning_rate <= 1:
        raise ValueError("learning_rate must be in (0, 1]")
    if n_stages < 0:
        raise ValueError("n_stages must be >= 0")
    d = X.shape[1]
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{i}" for i in range(d))
    if len(names) != d:
        raise ModelInputError("feature_names length does not match X")

    init = float(np.mean(y))
    pred = np.full(len(y), init)
    losses = [float(np.mean((y - pred) ** 2))]
    trees = []
    for _ in range(n_stages):
        tree = fit_tree(X, y - pred, "variance", max_depth, min_samples_leaf)
        trees.append(tree)
        pred = pred + learning_rate * tree.predict_value(X)
        losses.append(float(np.mean((y - pred) ** 2)))
    return GradientBoostedModel(
        init, trees, float(learning_rate), n_stages, max_depth, seed, names, min_samples_leaf, losses
    )


def gb_predict(model: GradientBoostedModel, x, *, clamp_at_zero: bool = False):
    """``init_value + learning_rate * sum(tree outputs)``.

    ``clamp_at_zero`` floors predictions at 0 for use as vote counts.
    """
    X, single = _as_2d(model.n_features, x)
    total = np.zeros(len(X))
    for tree in model.trees:
        total += tree.predict_value(X)
    pred = model.init_value + model.learning_rate * total
    if clamp_at_zero:
        pred = np.maximum(pred, 0.0)
    return float(pred[0]) if single else pred


def gb_staged_predict(model: GradientBoostedModel, X):
    """Yield predictions after 0, 1, ..., n_stages stages."""
    X, _ = _as_2d(model.n_features, X)
    pred = np.full(len(X), model.init_value)
    yield pred.copy()
    for tree in model.trees:
        pred = pred + model.learning_rate * tree.predict_value(X)
        yield pred.copy()
