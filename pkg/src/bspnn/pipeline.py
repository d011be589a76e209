"""End-to-end pipeline commands shared by the CLI and the tests.

Every command is deterministic given (config, seed): datasets are shuffled
with the recorded seed before training, gzip outputs are written with a
fixed timestamp, and JSON is emitted with sorted keys, so reruns reproduce
outputs byte for byte. Outputs go under the configured output directory:
``datasets/`` for built datasets, ``models/`` for serialized models and
training logs, ``reports/`` for evaluation artifacts.
"""

from __future__ import annotations

import json
import logging
import os
from typing import Sequence

import numpy as np

from . import anomaly as anomaly_mod
from . import booster as booster_mod
from . import datasets as ds_mod
from . import report as report_mod
from .config import RunConfig
from .errors import DataError, EncoderMismatch, MixedLabels, ValidationError
from .ingest import (
    CATEGORIES,
    N_CATEGORIES,
    NORMAL,
    Encoder,
    RawRecord,
    fit_encoder,
    load_category_map,
    load_schema,
    open_maybe_gzip,
)
from .metrics import confusion, detection_rate, load_cost_matrix, safe_rate

logger = logging.getLogger(__name__)

N_STAGES = ds_mod.N_CLUSTERS


def _dataset_dir(config: RunConfig) -> str:
    return os.path.join(config.output_dir, "datasets")


def _model_dir(config: RunConfig) -> str:
    return os.path.join(config.output_dir, "models")


def _report_dir(config: RunConfig) -> str:
    return os.path.join(config.output_dir, "reports")


def resolve_dataset_path(config: RunConfig, ref: str) -> str:
    """Interpret a dataset reference as a path or a built-dataset id."""
    if os.path.exists(ref):
        return ref
    stem = os.path.join(_dataset_dir(config), ref.lower())
    for candidate in (f"{stem}.csv.gz", f"{stem}.csv"):
        if os.path.exists(candidate):
            return candidate
    raise ValidationError(
        f"dataset {ref!r} is neither a file nor a built dataset id "
        f"(searched {stem}.csv[.gz]); run build-datasets first"
    )


def build_datasets(config: RunConfig) -> dict:
    """Construct and write the normal pool, clusters, and incremental sets.

    Subsample caps (when configured) are applied to the source once, before
    the split, so every incremental stage is a superset of the previous one.
    """
    config.require_paths(
        "train_file", "schema_file", "category_map_file", "cluster_table_file"
    )
    category_map = load_category_map(config.category_map_file)
    table = ds_mod.load_cluster_table(config.cluster_table_file)

    source = ds_mod.load_labeled_dataset(
        config.train_file, category_map, provenance="source"
    )
    summaries = [ds_mod.summarize(source)]
    caps = config.caps_list(config.train_caps)
    if any(cap is not None for cap in caps):
        source = ds_mod.subsample(source, caps, config.seed)
        source.provenance = "source|sampled"
        summaries.append(ds_mod.summarize(source))

    norm = ds_mod.filter_normal(source)
    clusters = ds_mod.build_clusters(source, table)

    out_dir = _dataset_dir(config)
    os.makedirs(out_dir, exist_ok=True)
    paths = {"norm": os.path.join(out_dir, "norm.csv.gz")}
    ds_mod.write_dataset(norm, paths["norm"])
    summaries.append(ds_mod.summarize(norm))
    for i, cluster in enumerate(clusters, 1):
        paths[f"c{i:02d}"] = os.path.join(out_dir, f"c{i:02d}.csv.gz")
        ds_mod.write_dataset(cluster, paths[f"c{i:02d}"])
        summaries.append(ds_mod.summarize(cluster))
    for k in range(1, N_STAGES + 1):
        stage = ds_mod.build_incremental(norm, clusters, k)
        paths[f"d{k:02d}"] = os.path.join(out_dir, f"d{k:02d}.csv.gz")
        ds_mod.write_dataset(stage, paths[f"d{k:02d}"])
        summaries.append(ds_mod.summarize(stage))

    summary_doc = {
        "seed": config.seed,
        "summaries": [s.to_dict() for s in summaries],
    }
    paths["summary_json"] = os.path.join(out_dir, "summary.json")
    report_mod.write_json(summary_doc, paths["summary_json"])
    paths["summary_text"] = os.path.join(out_dir, "summary.txt")
    with open(paths["summary_text"], "w", encoding="ascii") as fh:
        fh.write(_summary_table(summaries))
    logger.info("wrote %d dataset files under %s", len(paths) - 2, out_dir)
    return paths


def _summary_table(summaries: Sequence[ds_mod.DatasetSummary]) -> str:
    from .ingest import CATEGORY_DISPLAY

    header = f"{'Dataset':<16}" + "".join(f"{n:>10}" for n in CATEGORY_DISPLAY)
    header += f"{'Attack':>12}{'Total':>12}"
    lines = [header, "-" * len(header)]
    for s in summaries:
        row = f"{s.provenance:<16}" + "".join(
            f"{s.counts[i]:>10}" for i in range(N_CATEGORIES)
        )
        row += f"{s.total_attack:>12}{s.total:>12}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def _load_encoded_training_set(
    config: RunConfig, dataset_ref: str
) -> tuple[ds_mod.LabeledDataset, Encoder, np.ndarray, np.ndarray]:
    """Load, shuffle, parse, and encode a training dataset."""
    config.require_paths("schema_file", "category_map_file")
    schema = load_schema(config.schema_file)
    category_map = load_category_map(config.category_map_file)
    path = resolve_dataset_path(config, dataset_ref)
    ds = ds_mod.load_labeled_dataset(path, category_map, provenance=dataset_ref)
    if len(ds) == 0:
        raise DataError(f"training dataset {path!r} is empty")
    ds = ds_mod.shuffle_dataset(ds, config.seed)
    records = ds.parse_records(schema)
    encoder = fit_encoder(records, schema)
    X = encoder.encode_many(records)
    y = ds.categories.astype(np.int64)
    return ds, encoder, X, y


def save_model(path: str, envelope: dict) -> None:
    with open_maybe_gzip(path, "wt") as fh:
        json.dump(envelope, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path: str) -> dict:
    if not os.path.exists(path):
        raise ValidationError(f"model file does not exist: {path!r}")
    with open_maybe_gzip(path) as fh:
        return json.load(fh)


def train_model(config: RunConfig, mode: str, dataset_ref: str) -> dict:
    """Train a misuse or anomaly model and persist it with its log."""
    if mode not in ("misuse", "anomaly"):
        raise ValidationError(f"unknown training mode {mode!r}")
    ds, encoder, X, y = _load_encoded_training_set(config, dataset_ref)

    model_dir = _model_dir(config)
    os.makedirs(model_dir, exist_ok=True)
    stem = f"{mode}_{dataset_ref.lower().replace(os.sep, '_')}"
    model_path = os.path.join(model_dir, f"{stem}.json.gz")
    log_path = os.path.join(model_dir, f"{stem}.log")

    envelope = {
        "version": 1,
        "seed": config.seed,
        "dataset": ds.provenance,
        "encoder": encoder.to_dict(),
        "config": config.to_dict(),
    }
    if mode == "misuse":
        model = booster_mod.train_booster(
            X,
            y,
            class_count=N_CATEGORIES,
            config=config.boost_config(),
            base_params=config.base_params(),
            seed=config.seed,
        )
        envelope["kind"] = "boosted_misuse"
        envelope["model"] = model.to_dict()
        log_lines = [r.to_line() for r in model.records]
    else:
        if np.any(y != NORMAL):
            raise MixedLabels(
                f"anomaly training data {dataset_ref!r} contains attack records"
            )
        density = anomaly_mod.train_density(
            X,
            labels=y,
            radius=config.radius,
            auto_radius_factor=config.auto_radius_factor,
            seed=config.seed,
        )
        density = anomaly_mod.calibrate_threshold(
            density, X, config.anomaly_quantile
        )
        envelope["kind"] = "density_anomaly"
        envelope["model"] = density.to_dict()
        log_lines = [
            f"clusters={len(density.clusters)}  radius={density.radius:.6g}  "
            f"bandwidth={density.bandwidth:.6g}  quantile={density.quantile}  "
            f"threshold={density.threshold:.6g}"
        ]

    save_model(model_path, envelope)
    with open(log_path, "w", encoding="ascii") as fh:
        fh.write("\n".join(log_lines) + "\n")
    logger.info("model written to %s", model_path)
    return {"model": model_path, "log": log_path}


def _load_encoded_test_set(
    config: RunConfig, test_path: str, encoder: Encoder
) -> tuple[np.ndarray, np.ndarray]:
    schema = load_schema(config.schema_file)
    category_map = load_category_map(config.category_map_file)
    ds = ds_mod.load_labeled_dataset(test_path, category_map, provenance="test")
    caps = config.caps_list(config.test_caps)
    if any(cap is not None for cap in caps):
        ds = ds_mod.subsample(ds, caps, config.seed)
    if len(ds) == 0:
        raise DataError(f"test dataset {test_path!r} is empty")
    records = ds.parse_records(schema)
    X = encoder.encode_many(records)
    return X, ds.categories.astype(np.int64)


def evaluate_model(
    config: RunConfig, model_path: str, test_path: str | None = None
) -> dict[str, str]:
    """Evaluate a saved model against a labeled test file."""
    envelope = load_model(model_path)
    encoder = Encoder.from_dict(envelope["encoder"])
    if test_path is None:
        config.require_paths("test_file")
        test_path = config.test_file
    elif not os.path.exists(test_path):
        raise ValidationError(f"test file does not exist: {test_path!r}")
    X, truths = _load_encoded_test_set(config, test_path, encoder)

    kind = envelope.get("kind")
    out_dir = _report_dir(config)
    if kind == "boosted_misuse":
        model = booster_mod.BoostedModel.from_dict(envelope["model"])
        if X.shape[1] != model.width:
            raise EncoderMismatch(
                f"encoded width {X.shape[1]} does not match model width {model.width}"
            )
        preds = model.classify(X)
        cm = confusion(preds, truths, CATEGORIES)
        cost = load_cost_matrix(config.cost_matrix_file)
        comparisons = (
            report_mod.load_comparisons(config.misuse_comparison_file)
            if config.misuse_comparison_file
            else []
        )
        rep = report_mod.MisuseReport.build(
            cm, cost, comparisons,
            meta={"seed": config.seed, "model": model_path, "test": test_path},
        )
        return rep.save(out_dir)
    if kind == "density_anomaly":
        model = anomaly_mod.DensityModel.from_dict(envelope["model"])
        if X.shape[1] != model.width:
            raise EncoderMismatch(
                f"encoded width {X.shape[1]} does not match model width {model.width}"
            )
        flags = anomaly_mod.flag_anomalies(model, X)
        attacks = truths != NORMAL
        normals = ~attacks
        rep = report_mod.AnomalyReport(
            dr=float(flags[attacks].mean()) if attacks.any() else None,
            far=float(flags[normals].mean()) if normals.any() else None,
            attack_total=int(attacks.sum()),
            normal_total=int(normals.sum()),
            quantile=model.quantile,
            comparisons=(
                report_mod.load_comparisons(config.anomaly_comparison_file)
                if config.anomaly_comparison_file
                else []
            ),
            meta={"seed": config.seed, "model": model_path, "test": test_path},
        )
        return rep.save(out_dir)
    raise ValidationError(f"model file {model_path!r} has unknown kind {kind!r}")


def build_curve(config: RunConfig, stages: Sequence[int] | None = None) -> dict:
    """Train on each incremental stage and tabulate per-category test DR."""
    config.require_paths("test_file")
    stages = list(stages) if stages is not None else list(range(1, N_STAGES + 1))

    rates: dict[str, list[float | None]] = {name: [] for name in CATEGORIES}
    for k in stages:
        ref = f"d{k:02d}"
        _, encoder, X, y = _load_encoded_training_set(config, ref)
        model = booster_mod.train_booster(
            X,
            y,
            class_count=N_CATEGORIES,
            config=config.boost_config(),
            base_params=config.base_params(),
            seed=config.seed,
        )
        test_X, test_y = _load_encoded_test_set(config, config.test_file, encoder)
        preds = model.classify(test_X)
        cm = confusion(preds, test_y, CATEGORIES)
        for c, name in enumerate(CATEGORIES):
            rates[name].append(safe_rate(detection_rate, cm, c))
        logger.info("stage %s evaluated", ref)

    table = report_mod.CurveTable(
        stages=stages, rates=rates, meta={"seed": config.seed}
    )
    return table.save(_report_dir(config))


def predict_records(
    config: RunConfig, model_path: str, input_path: str, output_path: str | None
) -> int:
    """Score raw records with a saved model, one output line per input line.

    Input lines may carry 41 feature fields (unlabeled) or 42 fields
    (labeled; the label is ignored). Returns the number of lines written.
    """
    envelope = load_model(model_path)
    encoder = Encoder.from_dict(envelope["encoder"])
    if not os.path.exists(input_path):
        raise ValidationError(f"input file does not exist: {input_path!r}")

    records: list[RawRecord] = []
    with open_maybe_gzip(input_path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split(",")
            n_features = len(encoder.kinds)
            if len(fields) == n_features + 1:
                fields = fields[:-1]
            if len(fields) != n_features:
                raise DataError(
                    f"{input_path}:{lineno}: expected {n_features} or "
                    f"{n_features + 1} fields, got {len(fields)}"
                )
            for j, kind in enumerate(encoder.kinds):
                if kind == "continuous":
                    try:
                        float(fields[j])
                    except ValueError:
                        raise DataError(
                            f"{input_path}:{lineno}: column {j}: "
                            f"{fields[j]!r} is not numeric"
                        ) from None
            records.append(RawRecord(features=tuple(fields), label="?"))

    lines: list[str] = []
    if records:
        X = encoder.encode_many(records)
        kind = envelope.get("kind")
        if kind == "boosted_misuse":
            model = booster_mod.BoostedModel.from_dict(envelope["model"])
            scores = model.decision_scores(X)
            classes = np.argmax(scores, axis=1)
            for c, row in zip(classes, scores):
                lines.append(
                    CATEGORIES[c] + "," + ",".join(repr(float(v)) for v in row)
                )
        elif kind == "density_anomaly":
            model = anomaly_mod.DensityModel.from_dict(envelope["model"])
            flags = anomaly_mod.flag_anomalies(model, X)
            log_scores = anomaly_mod.log_density_scores(model, X)
            for flagged, ls in zip(flags, log_scores):
                lines.append(
                    ("anomaly" if flagged else "normal") + "," + repr(float(ls))
                )
        else:
            raise ValidationError(
                f"model file {model_path!r} has unknown kind {kind!r}"
            )

    text = "".join(line + "\n" for line in lines)
    if output_path is None:
        print(text, end="")
    else:
        with open_maybe_gzip(output_path, "wt") as fh:
            fh.write(text)
    return len(lines)
