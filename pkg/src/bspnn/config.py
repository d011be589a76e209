"""Run configuration: a JSON file with CLI flag overrides.

The config is the single source of truth for an experiment; every command
snapshots it (plus the seed) into its output artifacts so runs can be
reproduced byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from typing import Any

from .errors import ValidationError
from .ingest import CATEGORIES, default_asset
from .vq_grnn import BandwidthSearchSpec
from .booster import BaseLearnerParams, BoostConfig

DEFAULT_SEED = 902


def _default_caps() -> dict[str, int | None]:
    return {name: None for name in CATEGORIES}


@dataclass
class RunConfig:
    # input paths; schema, maps, and matrices default to packaged assets
    train_file: str | None = None
    test_file: str | None = None
    schema_file: str = field(default_factory=lambda: default_asset("kdd_schema.txt"))
    category_map_file: str = field(
        default_factory=lambda: default_asset("attack_categories.csv")
    )
    cluster_table_file: str = field(
        default_factory=lambda: default_asset("intrusion_clusters.txt")
    )
    cost_matrix_file: str = field(
        default_factory=lambda: default_asset("kdd99_cost_matrix.csv")
    )
    misuse_comparison_file: str | None = field(
        default_factory=lambda: default_asset("published_misuse_results.json")
    )
    anomaly_comparison_file: str | None = field(
        default_factory=lambda: default_asset("published_anomaly_results.json")
    )

    # quantization
    radius: float | None = None
    auto_radius_factor: float = 0.5

    # bandwidth search (None bounds mean the data-scale default window)
    delta_min: float | None = None
    delta_max: float | None = None
    bandwidth_tolerance: float = 1e-3
    bandwidth_max_evals: int = 100
    bandwidth_sample: int = 0

    # boosting
    rounds: int = 5
    alpha_mode: str = "kw_diversity"
    epsilon_prob: float = 1e-10
    alpha_floor: float = 1e-3
    wmse_stop: float | None = None

    # anomaly detection
    anomaly_quantile: float = 0.01

    # stratified subsampling caps (None keeps the whole category)
    train_caps: dict[str, int | None] = field(default_factory=_default_caps)
    test_caps: dict[str, int | None] = field(default_factory=_default_caps)

    seed: int = DEFAULT_SEED
    output_dir: str = "out"

    def bandwidth_spec(self) -> BandwidthSearchSpec | None:
        """Explicit search window, or None for the data-scale default."""
        if self.delta_min is None and self.delta_max is None:
            return None
        if self.delta_min is None or self.delta_max is None:
            raise ValidationError(
                "delta_min and delta_max must be set together"
            )
        return BandwidthSearchSpec(
            delta_min=self.delta_min,
            delta_max=self.delta_max,
            tolerance=self.bandwidth_tolerance,
            max_evals=self.bandwidth_max_evals,
        )

    def base_params(self) -> BaseLearnerParams:
        return BaseLearnerParams(
            radius=self.radius,
            auto_radius_factor=self.auto_radius_factor,
            bandwidth=self.bandwidth_spec(),
            bandwidth_sample=self.bandwidth_sample,
        )

    def boost_config(self) -> BoostConfig:
        return BoostConfig(
            rounds=self.rounds,
            wmse_stop=self.wmse_stop,
            epsilon_prob=self.epsilon_prob,
            alpha_floor=self.alpha_floor,
            alpha_mode=self.alpha_mode,
        )

    def caps_list(self, which: dict[str, int | None]) -> list[int | None]:
        return [which.get(name) for name in CATEGORIES]

    def require_paths(self, *attributes: str) -> None:
        """Validate that the named path attributes are set and exist."""
        for attribute in attributes:
            path = getattr(self, attribute)
            if path is None:
                raise ValidationError(f"config is missing required path {attribute!r}")
            if not os.path.exists(path):
                raise ValidationError(f"{attribute} does not exist: {path!r}")

    def to_dict(self) -> dict:
        return {
            "paths": {
                "train_file": self.train_file,
                "test_file": self.test_file,
                "schema": self.schema_file,
                "category_map": self.category_map_file,
                "cluster_table": self.cluster_table_file,
                "cost_matrix": self.cost_matrix_file,
                "misuse_comparisons": self.misuse_comparison_file,
                "anomaly_comparisons": self.anomaly_comparison_file,
            },
            "vq": {
                "radius": self.radius,
                "auto_radius_factor": self.auto_radius_factor,
            },
            "bandwidth": {
                "delta_min": self.delta_min,
                "delta_max": self.delta_max,
                "tolerance": self.bandwidth_tolerance,
                "max_evals": self.bandwidth_max_evals,
                "sample": self.bandwidth_sample,
            },
            "boost": {
                "rounds": self.rounds,
                "alpha_mode": self.alpha_mode,
                "epsilon_prob": self.epsilon_prob,
                "alpha_floor": self.alpha_floor,
                "wmse_stop": self.wmse_stop,
            },
            "anomaly": {"quantile": self.anomaly_quantile},
            "subsample": {
                "train_caps": self.train_caps,
                "test_caps": self.test_caps,
            },
            "seed": self.seed,
            "output_dir": self.output_dir,
        }


_SECTION_KEYS = {
    "paths": {
        "train_file": "train_file",
        "test_file": "test_file",
        "schema": "schema_file",
        "category_map": "category_map_file",
        "cluster_table": "cluster_table_file",
        "cost_matrix": "cost_matrix_file",
        "misuse_comparisons": "misuse_comparison_file",
        "anomaly_comparisons": "anomaly_comparison_file",
    },
    "vq": {"radius": "radius", "auto_radius_factor": "auto_radius_factor"},
    "bandwidth": {
        "delta_min": "delta_min",
        "delta_max": "delta_max",
        "tolerance": "bandwidth_tolerance",
        "max_evals": "bandwidth_max_evals",
        "sample": "bandwidth_sample",
    },
    "boost": {
        "rounds": "rounds",
        "alpha_mode": "alpha_mode",
        "epsilon_prob": "epsilon_prob",
        "alpha_floor": "alpha_floor",
        "wmse_stop": "wmse_stop",
    },
    "anomaly": {"quantile": "anomaly_quantile"},
}


def load_config(path: str | None) -> RunConfig:
    """Build a RunConfig from a JSON file (or all defaults when path=None)."""
    config = RunConfig()
    if path is None:
        return config
    if not os.path.exists(path):
        raise ValidationError(f"config file does not exist: {path!r}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file {path!r}: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"config file {path!r} must hold a JSON object")

    updates: dict[str, Any] = {}
    for section, keys in _SECTION_KEYS.items():
        body = doc.get(section, {})
        if not isinstance(body, dict):
            raise ValidationError(f"config section {section!r} must be an object")
        for key, value in body.items():
            if key not in keys:
                raise ValidationError(
                    f"config section {section!r} has unknown key {key!r}"
                )
            if value is not None:
                updates[keys[key]] = value
    subsample = doc.get("subsample", {})
    for caps_key, attribute in (("train_caps", "train_caps"), ("test_caps", "test_caps")):
        caps = subsample.get(caps_key)
        if caps is not None:
            unknown = set(caps) - set(CATEGORIES)
            if unknown:
                raise ValidationError(
                    f"subsample.{caps_key} has unknown categories {sorted(unknown)}"
                )
            merged = _default_caps()
            merged.update(caps)
            updates[attribute] = merged
    for key in ("seed", "output_dir"):
        if key in doc and doc[key] is not None:
            updates[key] = doc[key]
    known_top = set(_SECTION_KEYS) | {"subsample", "seed", "output_dir"}
    unknown_top = set(doc) - known_top
    if unknown_top:
        raise ValidationError(f"config has unknown sections {sorted(unknown_top)}")
    return replace(config, **updates)
