"""Command-line entry points.

Exit codes: 0 success, 2 parameter error, 3 data error, 4 numeric or
degeneracy error.
"""
from __future__ import annotations

import csv
import json
import sys

import click
import numpy as np

from . import data as data_mod
from . import detect, train as train_mod
from .errors import (DataError, DegeneracyError, ParameterError, TrainingError)

EXIT_CODES = {
    ParameterError: 2,
    DataError: 3,
    DegeneracyError: 4,
    TrainingError: 4,
}


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    for klass, code in EXIT_CODES.items():
        if isinstance(exc, klass):
            sys.exit(code)
    sys.exit(1)


def _load_features_json(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _load_dataset(csv_path, features_json=None, label_column=None):
    spec = _load_features_json(features_json)
    label = label_column or spec.get("label_column")
    dataset, dropped = data_mod.load_csv(
        csv_path,
        label_column=label,
        columns=spec.get("columns"),
        normal_values=tuple(spec.get("normal_values",
                                     data_mod.DEFAULT_NORMAL_VALUES)),
    )
    if dropped:
        click.echo(f"dropped {dropped} unparseable/non-finite rows", err=True)
    return dataset


def _config_from_json(path, seed):
    doc = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    weights = train_mod.LossWeights(**doc.pop("weights", {}))
    doc.setdefault("seed", seed)
    return train_mod.TrainConfig(weights=weights, **doc)


@click.group()
def main():
    """DRMDIT anomaly detector: train, score, eval, sweep, synth."""


@main.command("train")
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--features", "features_json", type=click.Path(), default=None,
              help="JSON {columns, label_column, normal_values}")
@click.option("--config", "config_json", type=click.Path(), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", default=42, show_default=True)
def cli_train(data_path, features_json, config_json, out_path, seed):
    """Train on normal data and write a JSON checkpoint."""
    try:
        dataset = _load_dataset(data_path, features_json)
        config = _config_from_json(config_json, seed)
        if dataset.labels is not None:
            keep = np.nonzero(dataset.labels == 0)[0]
            click.echo(f"training on {keep.size} normal rows "
                       f"(dropped {dataset.n_rows - keep.size} labeled anomalies)",
                       err=True)
            dataset = dataset.take(keep)
        filtered, dropped, widened = data_mod.skew_filter(dataset)
        note = " (cutoff widened to the 10% cap)" if widened else ""
        click.echo(f"skew filter dropped {dropped} rows{note}", err=True)
        record = data_mod.fit_minmax(filtered)
        normalized = data_mod.apply_minmax(filtered, record)
        model = train_mod.fit(normalized, config)
        doc = train_mod.model_to_dict(model)
        doc["normalization"] = record
        doc["feature_names"] = list(filtered.feature_names)
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        click.echo(f"wrote {out_path}")
    except Exception as exc:  # noqa: BLE001 - single funnel to exit codes
        _fail(exc)


def _load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    model = train_mod.model_from_dict(doc)
    return model, doc.get("normalization"), doc.get("feature_names")


def _prepare_scoring_data(model_doc_norm, feature_names, data_path,
                          features_json, label_column=None):
    spec = _load_features_json(features_json)
    columns = spec.get("columns") or feature_names
    dataset = _load_dataset(data_path, features_json, label_column=label_column)
    if columns and dataset.feature_names != list(columns):
        dataset, _ = data_mod.load_csv(
            data_path, label_column=label_column or spec.get("label_column"),
            columns=columns)
    if model_doc_norm is not None:
        dataset = data_mod.apply_minmax(
            dataset, [tuple(r) for r in model_doc_norm])
    return dataset


@main.command("score")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--features", "features_json", type=click.Path(), default=None)
@click.option("--mode", type=click.Choice(detect.SCORING_MODES),
              default="robust_md", show_default=True)
@click.option("--out", "out_prefix", required=True)
def cli_score(model_path, data_path, features_json, mode, out_prefix):
    """Score data against a checkpoint; write trace and report files."""
    try:
        model, norm, names = _load_model(model_path)
        dataset = _prepare_scoring_data(norm, names, data_path, features_json)
        scores = detect.score(model, dataset, mode=mode)
        center = model.train_score_medians.get(mode, float(np.median(scores)))
        report = detect.ScoreReport(
            scores=scores, transformed_scores=detect.fold_scores(scores, center),
            predictions=np.zeros(scores.size, dtype=np.int64),
            tags=["-"] * scores.size,
            band=detect.ScoreBand(low=-1e308, high=1e308),
            scoring_mode=mode, labels=dataset.labels,
        )
        paths = detect.emit_report(report, out_prefix)
        click.echo("wrote " + " and ".join(paths))
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--features", "features_json", type=click.Path(), default=None)
@click.option("--labels", "label_column", required=True,
              help="label column name in the CSV")
@click.option("--mode", type=click.Choice(detect.SCORING_MODES),
              default="robust_md", show_default=True)
@click.option("--band", default="auto", show_default=True,
              help="'auto' or explicit 'low,high'")
@click.option("--out", "out_prefix", required=True)
def cli_eval(model_path, data_path, features_json, label_column, mode, band,
             out_prefix):
    """Band-classify labeled data and report metrics."""
    try:
        model, norm, names = _load_model(model_path)
        dataset = _prepare_scoring_data(norm, names, data_path, features_json,
                                        label_column=label_column)
        if dataset.labels is None:
            raise ParameterError(f"label column {label_column!r} not found")
        if band == "auto":
            band_obj = None
        else:
            try:
                low, high = (float(v) for v in band.split(","))
            except ValueError:
                raise ParameterError(
                    f"--band must be 'auto' or 'low,high', got {band!r}"
                ) from None
            band_obj = detect.ScoreBand(low=low, high=high)
        report = detect.evaluate(model, dataset, mode=mode, band=band_obj)
        paths = detect.emit_report(report, out_prefix)
        click.echo(json.dumps(report.metrics, indent=1, sort_keys=True))
        click.echo("wrote " + " and ".join(paths))
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command("sweep")
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--features", "features_json", type=click.Path(), default=None)
@click.option("--sigma", "sigma_list", default="0.05,0.1,0.15,0.2",
              show_default=True)
@click.option("--epochs", default=10, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def cli_sweep(data_path, features_json, sigma_list, epochs, seed, out_path):
    """Grid-search sigma (and the default weight grid) on a labeled CSV."""
    try:
        dataset = _load_dataset(data_path, features_json)
        sigmas = [float(v) for v in sigma_list.split(",") if v]
        trainset, valset, _ = data_mod.split(dataset, 0.6, seed=seed)
        if trainset.labels is not None:
            trainset = trainset.take(np.nonzero(trainset.labels == 0)[0])
        record = data_mod.fit_minmax(trainset)
        train_norm = data_mod.apply_minmax(trainset, record)
        val_norm = data_mod.apply_minmax(valset, record)
        base = train_mod.TrainConfig(seed=seed)
        base.batch_size = min(base.batch_size, train_norm.n_rows)
        weight_grid = [train_mod.LossWeights()]
        best, table = train_mod.grid_search(train_norm, val_norm, sigmas,
                                           weight_grid, base_config=base,
                                           epochs=epochs)
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["sigma", "alpha", "beta", "gamma", "score"],
                lineterminator="\n")
            writer.writeheader()
            writer.writerows(table)
        click.echo(f"best sigma {best.sigma} (alpha={best.weights.alpha}, "
                   f"beta={best.weights.beta}); table in {out_path}")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command("synth")
@click.option("--spec", "spec_json", type=click.Path(), default=None,
              help="JSON with SynthSpec fields; defaults used when absent")
@click.option("--seed", default=42, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def cli_synth(spec_json, seed, out_path):
    """Generate the synthetic near/far benchmark as CSV."""
    try:
        doc = {}
        if spec_json is not None:
            with open(spec_json, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        doc.setdefault("seed", seed)
        spec = data_mod.SynthSpec(**doc)
        dataset = data_mod.synth_generate(spec)
        data_mod.save_csv(dataset, out_path)
        click.echo(f"wrote {out_path} ({dataset.n_rows} rows)")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


if __name__ == "__main__":
    main()
