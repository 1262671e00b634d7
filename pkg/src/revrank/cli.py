"""``revrank`` command-line front end.

Subcommands: ingest, featurize, train, rank, evaluate and the one-shot
pipeline. Settings come from flags, then an optional ``--config`` TOML
file, then built-in defaults.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from revrank._io import atomic_write_text
from revrank.corpus_io import (
    CorpusError,
    apply_vote_cap,
    build_corpus,
    load_corpus,
    parse_descriptions,
    parse_qa,
    parse_reviews,
    save_corpus,
)
from revrank.dataset import DatasetError, DegenerateClassError, assemble_features, features_csv, read_features_csv
from revrank.evaluation import format_class_table, roc_csv
from revrank.learners import FeatureMismatchError, ModelFileError
from revrank.pipeline import (
    ConfigError,
    ModelMismatchError,
    PipelineConfig,
    PipelineModels,
    evaluate_models,
    rank_with_models,
    run_pipeline,
    save_ranking,
    split_manifest,
)
from revrank.text_features import TextFeatureError, load_lexicons

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

logger = logging.getLogger("revrank")

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_MISMATCH = 0, 2, 3, 4

PATH_KEYS = (
    "reviews", "descriptions", "qa", "corpus", "features", "models", "out", "out_dir",
    "data_dir", "max_error_rate",
)
CONFIG_KEYS = frozenset(PipelineConfig.field_names()) | frozenset(PATH_KEYS)


class InputError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def read_config_file(path) -> dict:
    """Flat ``key = value`` TOML; unknown keys raise :class:`InputError`."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise InputError(f"{path}: unknown config key(s): {', '.join(unknown)}")
    nested = sorted(k for k, v in data.items() if isinstance(v, dict))
    if nested:
        raise InputError(f"{path}: tables are not supported ({', '.join(nested)})")
    return data


def merge_settings(file_values: dict, flags: dict) -> dict:
    """Flags that were given win over file values; None means 'not given'."""
    merged = dict(file_values)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


def pipeline_config(settings: dict, base: dict | None = None) -> PipelineConfig:
    fields = set(PipelineConfig.field_names())
    values = dict(base or {})
    values.update({k: v for k, v in settings.items() if k in fields})
    if isinstance(values.get("mode"), str):
        values["mode"] = values["mode"].replace("-", "_")
    if isinstance(values.get("smote_scope"), str):
        values["smote_scope"] = values["smote_scope"].replace("-", "_")
    try:
        return PipelineConfig(**values).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _require(settings: dict, *keys: str) -> None:
    missing = [k for k in keys if settings.get(k) in (None, "")]
    if missing:
        opts = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise InputError(f"missing required setting(s): {opts}")


def _lexicons(settings: dict):
    return load_lexicons(settings.get("data_dir"))


def guarded(fn):
    """Map library exceptions onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DegenerateClassError as exc:
            click.echo(f"error: degenerate classes: {exc}", err=True)
            sys.exit(EXIT_DEGENERATE)
        except (ModelMismatchError, FeatureMismatchError) as exc:
            click.echo(f"error: model mismatch: {exc}", err=True)
            sys.exit(EXIT_MISMATCH)
        except (InputError, ConfigError, CorpusError, DatasetError, ModelFileError,
                TextFeatureError, FileNotFoundError, json.JSONDecodeError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)

    return wrapper


def _setup_logging(quiet: bool, verbose: bool) -> None:
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="TOML file of key = value settings.")
@click.option("--quiet", is_flag=True, help="Only warnings and errors on stderr.")
@click.option("--verbose", is_flag=True, help="Debug logging.")
@click.pass_context
def cli(ctx, config_path, quiet, verbose):
    """Review helpfulness ranking."""
    _setup_logging(quiet, verbose)
    ctx.ensure_object(dict)
    ctx.obj["quiet"] = quiet
    file_values = {}
    if config_path:
        try:
            file_values = read_config_file(config_path)
        except InputError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
    ctx.obj["file"] = file_values


def _settings(ctx, **flags) -> dict:
    return merge_settings(ctx.obj["file"], flags)


# -- shared option groups ------------------------------------------------------

def _learner_options(fn):
    opts = [
        click.option("--case", type=int, default=None, help="Feature case 1..4."),
        click.option("--mode", type=click.Choice(["with-classifier", "without-classifier"]), default=None),
        click.option("--seed", type=int, default=None),
        click.option("--k", type=int, default=None, help="Cut-off for matching@k."),
        click.option("--classifier", type=click.Choice(["rf", "nb"]), default=None),
        click.option("--regressor", type=click.Choice(["gb", "ols"]), default=None),
        click.option("--smote-scope", type=click.Choice(["train_only", "pre_split", "train-only", "pre-split"]),
                     default=None),
        click.option("--smote-k", type=int, default=None),
        click.option("--rf-n-trees", type=int, default=None),
        click.option("--gb-n-stages", type=int, default=None),
        click.option("--n-jobs", type=int, default=None),
        click.option("--data-dir", type=click.Path(file_okay=False), default=None,
                     help="Directory with the word lists (default $REVRANK_DATA_DIR)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _load_models(settings: dict, expected_case: int | None):
    _require(settings, "models")
    return PipelineModels.load(settings["models"], expected_case)


def _features_case(settings: dict) -> int | None:
    if not settings.get("features"):
        return None
    case, _ = read_features_csv(settings["features"])
    return case


def _print_tables(report, label: str) -> None:
    if report.per_class:
        click.echo(format_class_table(report.per_class, title=label))
    if report.auc is not None:
        click.echo(f"AUC: {report.auc:.4f}")
    if report.mse is not None:
        click.echo(f"MSE (high-quality test): {report.mse:.4f}")
    if report.matching is not None:
        flag = " (truncated)" if report.matching_truncated else ""
        click.echo(f"matching@{report.matching_k}: {report.matching}{flag}")


# -- commands ------------------------------------------------------------------

def _ingest(settings: dict, quiet: bool):
    _require(settings, "reviews", "descriptions")
    errors: list[str] = []
    rate = float(settings.get("max_error_rate", 0.10))
    reviews = parse_reviews(settings["reviews"], max_error_rate=rate, errors=errors)
    descriptions = parse_descriptions(settings["descriptions"])
    qa = {}
    if settings.get("qa"):
        if Path(settings["qa"]).exists():
            qa = parse_qa(settings["qa"])
        else:
            logger.warning("QA file %s not found; continuing with empty QA", settings["qa"])
    corpus = build_corpus(reviews, descriptions, qa)
    corpus.cleaning_report.rejected_records = errors
    corpus = apply_vote_cap(corpus)
    if not quiet:
        click.echo(_dump({"cleaning_report": corpus.cleaning_report.to_dict()}), err=True, nl=False)
    return corpus


@cli.command()
@click.option("--reviews", type=click.Path(), default=None, help="Reviews file (.csv or .jsonl).")
@click.option("--descriptions", type=click.Path(), default=None, help="Product descriptions (.jsonl).")
@click.option("--qa", type=click.Path(), default=None, help="Optional QA file (.jsonl).")
@click.option("--out", type=click.Path(), default=None, help="Output corpus (default corpus.json).")
@click.option("--max-error-rate", type=float, default=None)
@click.pass_context
@guarded
def ingest(ctx, **flags):
    """Parse, clean and vote-cap the raw inputs into corpus.json."""
    settings = _settings(ctx, **flags)
    corpus = _ingest(settings, ctx.obj["quiet"])
    out = settings.get("out") or "corpus.json"
    save_corpus(corpus, out)
    logger.info("wrote %s (%d reviews)", out, len(corpus.reviews))


@cli.command()
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--case", type=int, default=None, help="Feature case 1..4.")
@click.option("--out", type=click.Path(), default=None, help="Output CSV (default features.csv).")
@click.option("--data-dir", type=click.Path(file_okay=False), default=None)
@click.pass_context
@guarded
def featurize(ctx, **flags):
    """Write the feature matrix for one case (no label columns)."""
    settings = _settings(ctx, **flags)
    _require(settings, "corpus")
    config = pipeline_config(settings)
    corpus = load_corpus(settings["corpus"])
    rows = assemble_features(corpus, config.case, _lexicons(settings))
    out = settings.get("out") or "features.csv"
    atomic_write_text(out, features_csv(rows, config.case))
    logger.info("wrote %s (%d rows, case %d)", out, len(rows), config.case)


def _train(corpus, config: PipelineConfig, out_dir: Path, lexicons, run_config: dict):
    ranked, report, models = run_pipeline(corpus, config, lexicons)
    out_dir.mkdir(parents=True, exist_ok=True)
    stale = out_dir / "classifier.json"
    if models.classifier is None and stale.exists():
        stale.unlink()
    models.save(out_dir)
    atomic_write_text(out_dir / "split.json", _dump(split_manifest(corpus, config, lexicons)))
    metrics = {
        "classifier": config.classifier if models.classifier is not None else None,
        "regressor": config.regressor,
        "report": report.to_dict(),
        "run_config": run_config,
    }
    atomic_write_text(out_dir / "train_metrics.json", _dump(metrics))
    return ranked, report, models


@cli.command()
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--features", type=click.Path(), default=None, help="features.csv; fixes the case.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Model directory (default models).")
@_learner_options
@click.pass_context
@guarded
def train(ctx, **flags):
    """Fit classifier and regressor; write models, split manifest and metrics."""
    settings = _settings(ctx, **flags)
    _require(settings, "corpus")
    case = _features_case(settings)
    if case is not None:
        if flags.get("case") is not None and flags["case"] != case:
            raise InputError(f"--case {flags['case']} contradicts case {case} of {settings['features']}")
        settings["case"] = case
    config = pipeline_config(settings)
    corpus = load_corpus(settings["corpus"])
    out_dir = Path(settings.get("out_dir") or "models")
    _, report, _ = _train(corpus, config, out_dir, _lexicons(settings), _echo(settings, config))
    _print_tables(report, f"{config.classifier.upper()} (case {config.case})" if config.mode == "with_classifier" else "")
    logger.info("models written to %s", out_dir)


def _echo(settings: dict, config: PipelineConfig) -> dict:
    echo = {k: settings[k] for k in PATH_KEYS if settings.get(k) is not None}
    echo.update(config.to_dict())
    return echo


def _config_from_models(models: PipelineModels, settings: dict) -> PipelineConfig:
    base = {k: v for k, v in models.config.items() if k in PipelineConfig.field_names()}
    base["case"] = models.case
    overrides = {k: v for k, v in settings.items() if k in ("mode", "k", "seed")}
    if "mode" not in overrides and models.classifier is None:
        overrides["mode"] = "without_classifier"
    return pipeline_config(overrides, base)


def _check_case(settings: dict, models: PipelineModels) -> None:
    case = _features_case(settings)
    for source, c in (("features file", case), ("--case", settings.get("case"))):
        if c is not None and c != models.case:
            raise ModelMismatchError(f"models were trained for case {models.case}, {source} is case {c}")


@cli.command()
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--models", type=click.Path(file_okay=False), default=None)
@click.option("--features", type=click.Path(), default=None, help="Checked against the models' case.")
@click.option("--case", type=int, default=None)
@click.option("--mode", type=click.Choice(["with-classifier", "without-classifier"]), default=None)
@click.option("--k", type=int, default=None)
@click.option("--out", type=click.Path(), default=None, help="Output ranking (default ranking.json).")
@click.option("--data-dir", type=click.Path(file_okay=False), default=None)
@click.pass_context
@guarded
def rank(ctx, **flags):
    """Rank a corpus with trained models and report matching@k."""
    settings = _settings(ctx, **flags)
    _require(settings, "corpus")
    models = _load_models(settings, None)
    _check_case(settings, models)
    config = _config_from_models(models, settings)
    corpus = load_corpus(settings["corpus"])
    ranked, report = rank_with_models(corpus, models, config, _lexicons(settings))
    out = settings.get("out") or "ranking.json"
    save_ranking(ranked, out)
    flag = " (truncated)" if report.matching_truncated else ""
    click.echo(f"matching@{report.matching_k}: {ranked.matching}{flag}")


@cli.command()
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--models", type=click.Path(file_okay=False), default=None)
@click.option("--features", type=click.Path(), default=None, help="Checked against the models' case.")
@click.option("--case", type=int, default=None)
@click.option("--k", type=int, default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Default: current directory.")
@click.option("--data-dir", type=click.Path(file_okay=False), default=None)
@click.pass_context
@guarded
def evaluate(ctx, **flags):
    """Score trained models on their held-out split; write report.json and roc.csv."""
    settings = _settings(ctx, **flags)
    _require(settings, "corpus")
    models = _load_models(settings, None)
    _check_case(settings, models)
    config = _config_from_models(models, settings)
    corpus = load_corpus(settings["corpus"])
    report = evaluate_models(corpus, models, config, _lexicons(settings))
    report.config = _echo(settings, config)
    out_dir = Path(settings.get("out_dir") or ".")
    _write_report(report, out_dir)
    label = f"{config.classifier.upper()} (case {config.case})" if models.classifier is not None else ""
    _print_tables(report, label)


def _write_report(report, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / "report.json", _dump(report.to_dict()))
    if report.roc_points:
        atomic_write_text(out_dir / "roc.csv", roc_csv(report))


@cli.command()
@click.option("--reviews", type=click.Path(), default=None)
@click.option("--descriptions", type=click.Path(), default=None)
@click.option("--qa", type=click.Path(), default=None)
@click.option("--max-error-rate", type=float, default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Default: run.")
@_learner_options
@click.pass_context
@guarded
def pipeline(ctx, **flags):
    """Ingest, featurize, train, rank and evaluate in one go."""
    settings = _settings(ctx, **flags)
    config = pipeline_config(settings)
    lexicons = _lexicons(settings)
    out_dir = Path(settings.get("out_dir") or "run")
    corpus = _ingest(settings, ctx.obj["quiet"])
    out_dir.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out_dir / "corpus.json")
    rows = assemble_features(corpus, config.case, lexicons)
    atomic_write_text(out_dir / "features.csv", features_csv(rows, config.case))
    ranked, report, _ = _train(corpus, config, out_dir / "models", lexicons, _echo(settings, config))
    save_ranking(ranked, out_dir / "ranking.json")
    report.config = _echo(settings, config)
    _write_report(report, out_dir)
    label = f"{config.classifier.upper()} (case {config.case})" if config.mode == "with_classifier" else ""
    _print_tables(report, label)


def main(argv=None):
    cli.main(args=argv, prog_name="revrank")


if __name__ == "__main__":
    main()
