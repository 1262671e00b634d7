"""Gaussian naive Bayes and least-squares baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from revrank.learners.ensemble import ModelInputError, _as_2d


class SingularSystemError(ArithmeticError):
    pass


@dataclass
class GaussianNBModel:
    classes: tuple[int, ...]
    means: np.ndarray      # (n_classes, n_features)
    variances: np.ndarray  # (n_classes, n_features), smoothed
    priors: np.ndarray
    epsilon: float
    feature_names: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def hyperparams(self) -> dict:
        return {"var_smoothing": 1e-9}


def nb_fit(X, y, *, feature_names=None, var_smoothing: float = 1e-9) -> GaussianNBModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise ModelInputError("naive Bayes needs both classes in the training data")
    d = X.shape[1]
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{i}" for i in range(d))
    eps = var_smoothing * float(np.var(X, axis=0).max())
    if eps <= 0:
        # every feature constant
        eps = var_smoothing
    means = np.array([X[y == c].mean(axis=0) for c in classes])
    variances = np.array([X[y == c].var(axis=0) for c in classes]) + eps
    priors = np.array([np.mean(y == c) for c in classes])
    return GaussianNBModel(classes, means, variances, priors, eps, names)


def _joint_log_likelihood(model: GaussianNBModel, X: np.ndarray) -> np.ndarray:
    out = np.empty((len(X), len(model.classes)))
    for j in range(len(model.classes)):
        var = model.variances[j]
        ll = -0.5 * np.sum(np.log(2.0 * np.pi * var)) - 0.5 * np.sum((X - model.means[j]) ** 2 / var, axis=1)
        out[:, j] = np.log(model.priors[j]) + ll
    return out


def nb_predict_proba(model: GaussianNBModel, x):
    """Posterior probability of class 1."""
    X, single = _as_2d(model.n_features, x)
    jll = _joint_log_likelihood(model, X)
    jll -= jll.max(axis=1, keepdims=True)
    post = np.exp(jll)
    post /= post.sum(axis=1, keepdims=True)
    p1 = post[:, model.classes.index(1)]
    return float(p1[0]) if single else p1


def nb_predict(model: GaussianNBModel, x):
    p = nb_predict_proba(model, x)
    return int(p >= 0.5) if np.isscalar(p) else (p >= 0.5).astype(int)


@dataclass
class LinearModel:
    coef: np.ndarray
    intercept: float
    feature_names: tuple[str, ...]
    ridge: float = 0.0

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def hyperparams(self) -> dict:
        return {"ridge": self.ridge}


def ols_fit(X, y, *, feature_names=None, ridge_fallback: bool = True, ridge: float = 1e-8) -> LinearModel:
    """Least squares with intercept via the normal equations.

    A rank-deficient design falls back to ridge regularisation ``ridge * I``
    (intercept unpenalised) unless ``ridge_fallback`` is off.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n <= d:
        raise ModelInputError(f"OLS needs more rows than features ({n} <= {d})")
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{i}" for i in range(d))
    A = np.hstack([X, np.ones((n, 1))])
    gram = A.T @ A
    rhs = A.T @ y
    used_ridge = 0.0
    if np.linalg.matrix_rank(A) < d + 1:
        if not ridge_fallback:
            raise SingularSystemError("design matrix is rank deficient")
        used_ridge = ridge
        penalty = np.eye(d + 1) * ridge
        penalty[d, d] = 0.0
        gram = gram + penalty
    try:
        beta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        if not ridge_fallback:
            raise SingularSystemError("normal equations are singular") from None
        used_ridge = ridge
        beta = np.linalg.lstsq(gram + np.eye(d + 1) * ridge, rhs, rcond=None)[0]
    return LinearModel(beta[:d].copy(), float(beta[d]), names, used_ridge)


def ols_predict(model: LinearModel, x, *, clamp_at_zero: bool = False):
    X, single = _as_2d(model.n_features, x)
    pred = X @ model.coef + model.intercept
    if clamp_at_zero:
        pred = np.maximum(pred, 0.0)
    return float(pred[0]) if single else pred
