"""Versioned JSON model files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from revrank._io import atomic_write_text
from revrank.learners.baselines import GaussianNBModel, LinearModel
from revrank.learners.ensemble import GradientBoostedModel, RandomForestModel
from revrank.learners.tree import Tree

FORMAT_VERSION = 1


class ModelFileError(ValueError):
    pass


class UnsupportedModelError(ModelFileError):
    pass


class ModelVersionError(ModelFileError):
    pass


class ModelSchemaError(ModelFileError):
    pass


class TruncatedModelError(ModelFileError):
    pass


class FeatureMismatchError(ValueError):
    pass


def model_type(model) -> str:
    if isinstance(model, RandomForestModel):
        return "rf"
    if isinstance(model, GradientBoostedModel):
        return "gb"
    if isinstance(model, GaussianNBModel):
        return "nb"
    if isinstance(model, LinearModel):
        return "ols"
    raise UnsupportedModelError(f"unsupported model object {type(model).__name__}")


def _payload(model) -> dict:
    if isinstance(model, RandomForestModel):
        return {"trees": [t.to_dict() for t in model.trees]}
    if isinstance(model, GradientBoostedModel):
        return {
            "init_value": model.init_value,
            "trees": [t.to_dict() for t in model.trees],
            "train_loss": list(model.train_loss),
        }
    if isinstance(model, GaussianNBModel):
        return {
            "classes": list(model.classes),
            "means": model.means.tolist(),
            "variances": model.variances.tolist(),
            "priors": model.priors.tolist(),
            "epsilon": model.epsilon,
        }
    return {"coef": model.coef.tolist(), "intercept": model.intercept}


def model_to_dict(model, extra: dict | None = None) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "model_type": model_type(model),
        "feature_names": list(model.feature_names),
        "hyperparams": model.hyperparams(),
        "payload": _payload(model),
    }
    if extra:
        doc["metadata"] = extra
    return doc


def dumps_model(model, extra: dict | None = None) -> str:
    return json.dumps(model_to_dict(model, extra), sort_keys=True, indent=1) + "\n"


def save_model(model, path, extra: dict | None = None) -> None:
    """Write ``model`` atomically; ``extra`` lands under ``metadata``."""
    atomic_write_text(path, dumps_model(model, extra))


def _require(mapping, key, kind, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ModelSchemaError(f"{where}: missing {key!r}")
    value = mapping[key]
    if kind is not None and not isinstance(value, kind):
        raise ModelSchemaError(f"{where}: {key!r} has wrong type {type(value).__name__}")
    return value


def _trees(payload, where) -> list[Tree]:
    raw = _require(payload, "trees", list, where)
    try:
        return [Tree.from_dict(t) for t in raw]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelSchemaError(f"{where}: bad tree ({exc})") from None


def model_from_dict(doc: dict, where: str = "model"):
    if not isinstance(doc, dict):
        raise ModelSchemaError(f"{where}: top level is not an object")
    version = _require(doc, "format_version", int, where)
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"{where}: format_version {version} (supported: {FORMAT_VERSION})")
    kind = _require(doc, "model_type", str, where)
    if kind not in ("rf", "gb", "nb", "ols"):
        raise UnsupportedModelError(f"{where}: unsupported model type {kind!r}")
    names = tuple(_require(doc, "feature_names", list, where))
    hp = _require(doc, "hyperparams", dict, where)
    payload = _require(doc, "payload", dict, where)
    try:
        if kind == "rf":
            trees = _trees(payload, where)
            model = RandomForestModel(
                trees, hp["n_trees"], hp["max_features"], hp["seed"], names,
                hp.get("max_depth"), hp.get("min_samples_leaf", 1), hp.get("bootstrap", True),
            )
            if len(trees) != model.n_trees:
                raise ModelSchemaError(f"{where}: {len(trees)} trees but n_trees={model.n_trees}")
        elif kind == "gb":
            model = GradientBoostedModel(
                float(payload["init_value"]), _trees(payload, where), float(hp["learning_rate"]),
                hp["n_stages"], hp["max_depth"], hp["seed"], names,
                hp.get("min_samples_leaf", 1), list(payload.get("train_loss", [])),
            )
            if len(model.trees) != model.n_stages:
                raise ModelSchemaError(f"{where}: {len(model.trees)} trees but n_stages={model.n_stages}")
        elif kind == "nb":
            model = GaussianNBModel(
                tuple(payload["classes"]), np.asarray(payload["means"], dtype=float),
                np.asarray(payload["variances"], dtype=float), np.asarray(payload["priors"], dtype=float),
                float(payload["epsilon"]), names,
            )
            if model.means.shape != (len(model.classes), len(names)):
                raise ModelSchemaError(f"{where}: NB parameter shape mismatch")
        else:
            model = LinearModel(
                np.asarray(payload["coef"], dtype=float), float(payload["intercept"]), names,
                float(hp.get("ridge", 0.0)),
            )
            if model.coef.shape != (len(names),):
                raise ModelSchemaError(f"{where}: coefficient dimension mismatch")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise ModelSchemaError(f"{where}: malformed payload ({exc})") from None
    if kind in ("rf", "gb"):
        for t in model.trees:
            if t.n_features != len(names):
                raise ModelSchemaError(f"{where}: tree dimension differs from feature_names")
    return model


def load_model(path, *, with_metadata: bool = False):
    """Read a model file written by :func:`save_model`."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TruncatedModelError(f"{path}: truncated or corrupt JSON ({exc.msg} at char {exc.pos})") from None
    model = model_from_dict(doc, str(path))
    if with_metadata:
        return model, doc.get("metadata", {})
    return model


def check_feature_names(model, names) -> None:
    if tuple(names) != tuple(model.feature_names):
        raise FeatureMismatchError(
            f"model expects features {list(model.feature_names)}, got {list(names)}"
        )
