"""One-class anomaly detection over a normal-traffic density model.

The normal records are quantized exactly like the classifier's training
data, and the resulting count-weighted kernel mixture

    s(x) = (1 / sum_i Z_i) * sum_i Z_i exp(-||x - c_i||^2 / (2 delta^2))

is used as a density score in (0, 1]. The bandwidth is picked on a log grid
by maximizing held-out average log-density with the clusters split into
folds (classification error is undefined with a single class). A threshold
calibrated to a low quantile of the training scores flags queries scoring
strictly below it as anomalies.

Scoring runs in log space throughout, so far-away queries degrade smoothly
instead of underflowing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import vq_grnn
from .errors import (
    EmptyDataset,
    MixedLabels,
    QuantileOutOfRange,
    UncalibratedModel,
    WidthMismatch,
)
from .vq_grnn import ClusterSet, _squared_distances

logger = logging.getLogger(__name__)

DEFAULT_QUANTILE = 0.01
_GRID_SIZE = 20
_FOLDS = 5


@dataclass(frozen=True)
class DensityModel:
    """Kernel density model over quantized normal traffic.

    threshold/log_threshold stay None until calibration; classification
    requires a calibrated model.
    """

    clusters: ClusterSet
    bandwidth: float
    radius: float
    quantile: float | None = None
    threshold: float | None = None
    log_threshold: float | None = None

    @property
    def width(self) -> int:
        return self.clusters.width

    @property
    def calibrated(self) -> bool:
        return self.log_threshold is not None

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "kind": "density_anomaly",
            "class_count": 1,
            "bandwidth": self.bandwidth,
            "radius": self.radius,
            "clusters": self.clusters.to_dict(),
            "quantile": self.quantile,
            "threshold": self.threshold,
            "log_threshold": self.log_threshold,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DensityModel":
        return cls(
            clusters=ClusterSet.from_dict(doc["clusters"]),
            bandwidth=float(doc["bandwidth"]),
            radius=float(doc["radius"]),
            quantile=doc.get("quantile"),
            threshold=doc.get("threshold"),
            log_threshold=doc.get("log_threshold"),
        )


def _log_mixture_scores(
    clusters: ClusterSet, X: np.ndarray, delta: float
) -> np.ndarray:
    """log s(x) per query, computed with a shifted log-sum-exp."""
    logz = np.log(clusters.counts.astype(np.float64))
    log_total = math.log(float(clusters.counts.sum()))
    out = np.empty(len(X))
    step = vq_grnn._chunk_rows(len(X), len(clusters))
    for i in range(0, len(X), step):
        d2 = _squared_distances(X[i : i + step], clusters.centers)
        s = d2 * (-1.0 / (2.0 * delta * delta)) + logz
        m = s.max(axis=1)
        safe = np.isfinite(m)
        shifted = np.exp(s - np.where(safe, m, 0.0)[:, None])
        ls = np.where(
            safe, m + np.log(shifted.sum(axis=1)) - log_total, -np.inf
        )
        out[i : i + step] = ls
    # the mixture average of kernels in (0, 1] cannot exceed 1
    return np.minimum(out, 0.0)


def log_density_scores(model: DensityModel, X: np.ndarray) -> np.ndarray:
    """Log density scores for a block of queries."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.width:
        raise WidthMismatch(
            f"query width {X.shape[1]} does not match model width {model.width}"
        )
    return _log_mixture_scores(model.clusters, X, model.bandwidth)


def density_score(model: DensityModel, x: np.ndarray) -> float:
    """Density score in (0, 1] for a single query."""
    ls = float(log_density_scores(model, np.asarray(x))[0])
    return max(math.exp(ls), np.finfo(np.float64).tiny)


def train_density(
    X: np.ndarray,
    labels: np.ndarray | None = None,
    *,
    radius: float | None = None,
    auto_radius_factor: float = 0.5,
    grid_size: int = _GRID_SIZE,
    folds: int = _FOLDS,
    nn_sample: int = 1000,
    seed: int = 0,
) -> DensityModel:
    """Quantize the normal pool and pick the bandwidth by held-out density.

    When labels are supplied, every record must be normal (category 0).
    The bandwidth grid spans two decades around the data scale; each grid
    value is scored by the count-weighted average log-density of held-out
    cluster centers under the remaining clusters, with clusters assigned
    round-robin to folds. Single-cluster models skip the search and use the
    data scale directly.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyDataset("train_density needs a non-empty 2-D sample")
    if labels is not None:
        labels = np.asarray(labels)
        if np.any(labels != 0):
            raise MixedLabels(
                "one-class training data contains non-normal records"
            )
    n = len(X)
    nn_scale = vq_grnn.median_nn_distance(X, sample_size=nn_sample, seed=seed)
    if radius is None:
        radius = auto_radius_factor * nn_scale
    clusters = vq_grnn.quantize(
        X, np.zeros(n, dtype=np.int64), np.full(n, 1.0 / n), radius, class_count=1
    )
    r_eff = max(radius, nn_scale)
    if r_eff <= 0.0:
        r_eff = 1.0
    if len(clusters) < 2:
        bandwidth = r_eff
    else:
        grid = np.geomspace(1e-2 * r_eff, 1e2 * r_eff, grid_size)
        bandwidth = _grid_bandwidth(clusters, grid, min(folds, len(clusters)))
    logger.info(
        "density model: %d clusters (radius %.6g), bandwidth %.6g",
        len(clusters), radius, bandwidth,
    )
    return DensityModel(clusters=clusters, bandwidth=bandwidth, radius=radius)


def _grid_bandwidth(
    clusters: ClusterSet, grid: np.ndarray, folds: int
) -> float:
    """Grid value maximizing held-out weighted average log-density.

    Held-to-rest distances depend only on the fold split, so they are
    computed once per fold and shared across the whole grid.
    """
    m = len(clusters)
    totals = np.zeros(len(grid))
    z = clusters.counts.astype(np.float64)
    for f in range(folds):
        held = np.arange(f, m, folds)
        rest = np.setdiff1d(np.arange(m), held)
        if rest.size == 0:
            continue
        logz_rest = np.log(z[rest])
        log_total = math.log(float(z[rest].sum()))
        step = vq_grnn._chunk_rows(held.size, rest.size)
        for i in range(0, held.size, step):
            block = held[i : i + step]
            d2 = _squared_distances(clusters.centers[block], clusters.centers[rest])
            for gi, delta in enumerate(grid):
                s = d2 * (-1.0 / (2.0 * delta * delta)) + logz_rest
                mx = s.max(axis=1)
                ls = mx + np.log(np.exp(s - mx[:, None]).sum(axis=1)) - log_total
                ls = np.minimum(ls, 0.0)
                totals[gi] += float((z[block] * ls).sum())
    totals /= z.sum()
    best = int(np.argmin(-totals))  # argmax; ties go to the smaller bandwidth
    return float(grid[best])


def calibrate_threshold(
    model: DensityModel, X: np.ndarray, quantile: float = DEFAULT_QUANTILE
) -> DensityModel:
    """Set the anomaly threshold to a low quantile of the training scores.

    By construction roughly that fraction of the training normals score
    strictly below the threshold. Recalibrating with the same quantile and
    data is idempotent.
    """
    if not 0.0 < quantile < 1.0:
        raise QuantileOutOfRange(f"quantile must be in (0, 1), got {quantile}")
    ls = log_density_scores(model, X)
    # the order statistic at (not above) the quantile: with the strict
    # decision rule this flags at most a fraction `quantile` of the
    # training normals, and none of them as the quantile approaches zero
    log_tau = float(np.quantile(ls, quantile, method="lower"))
    return DensityModel(
        clusters=model.clusters,
        bandwidth=model.bandwidth,
        radius=model.radius,
        quantile=quantile,
        threshold=math.exp(log_tau),
        log_threshold=log_tau,
    )


def flag_anomalies(model: DensityModel, X: np.ndarray) -> np.ndarray:
    """Boolean anomaly flags: score strictly below the threshold."""
    if not model.calibrated:
        raise UncalibratedModel("calibrate_threshold must run before classification")
    return log_density_scores(model, X) < model.log_threshold


def classify_anomaly(model: DensityModel, x: np.ndarray) -> bool:
    """True when the single query is an anomaly (boundary counts as normal)."""
    return bool(flag_anomalies(model, np.asarray(x))[0])
