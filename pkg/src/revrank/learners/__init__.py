from revrank.learners.baselines import (
    GaussianNBModel,
    LinearModel,
    SingularSystemError,
    nb_fit,
    nb_predict,
    nb_predict_proba,
    ols_fit,
    ols_predict,
)
from revrank.learners.ensemble import (
    GradientBoostedModel,
    ModelInputError,
    RandomForestModel,
    gb_fit,
    gb_predict,
    gb_staged_predict,
    rf_fit,
    rf_predict,
    rf_predict_proba,
)
from revrank.learners.persistence import (
    FeatureMismatchError,
    ModelFileError,
    ModelSchemaError,
    ModelVersionError,
    TruncatedModelError,
    UnsupportedModelError,
    check_feature_names,
    load_model,
    save_model,
)
from revrank.learners.tree import Tree, fit_tree, gini


def predict_proba(model, X):
    """Class-1 probability for any fitted classifier."""
    if isinstance(model, RandomForestModel):
        return rf_predict_proba(model, X)
    if isinstance(model, GaussianNBModel):
        return nb_predict_proba(model, X)
    raise TypeError(f"{type(model).__name__} is not a classifier")


def predict_score(model, X, *, clamp_at_zero: bool = False):
    """Regression output for any fitted regressor."""
    if isinstance(model, GradientBoostedModel):
        return gb_predict(model, X, clamp_at_zero=clamp_at_zero)
    if isinstance(model, LinearModel):
        return ols_predict(model, X, clamp_at_zero=clamp_at_zero)
    raise TypeError(f"{type(model).__name__} is not a regressor")
