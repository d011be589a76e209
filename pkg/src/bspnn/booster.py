"""Diversity-weighted multiclass adaptive boosting.

Each round trains the kernel-mixture base learner on the current example
distribution, converts its probability outputs to zero-sum log-probability
scores, and reweights the examples with the coded-label exponential update
(true class coded +1, every other class -1/(K-1)), so examples the round
got wrong gain relative weight. The aggregation weight of a round is the
Kohavi-Wolpert variance of the ensemble built so far (the first round
weighs 1); because that variance is identically zero for a one-classifier
ensemble, aggregation weights are floored at a small positive value, and a
uniform mode is provided as a reference configuration.

The final classifier takes the argmax over the weighted sum of per-round
log-probability scores.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import vq_grnn
from .errors import (
    AllZeroWeights,
    EmptyDataset,
    ValidationError,
    WidthMismatch,
    ZeroSize,
)
from .vq_grnn import BandwidthSearchSpec, VqGrnnModel

logger = logging.getLogger(__name__)

DEFAULT_EPSILON_PROB = 1e-10
DEFAULT_ALPHA_FLOOR = 1e-3


def init_distribution(n: int) -> np.ndarray:
    """Uniform starting distribution: every example weighs 1/n."""
    if n < 1:
        raise ZeroSize("cannot initialize a distribution over zero examples")
    return np.full(n, 1.0 / n)


def normalize_weights(w: np.ndarray) -> np.ndarray:
    """Scale non-negative weights to sum to one."""
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0.0):
        raise ValidationError("weights must be non-negative")
    total = w.sum()
    if total <= 0.0:
        raise AllZeroWeights("cannot normalize an all-zero weight vector")
    return w / total


def kohavi_wolpert_variance(
    correct_counts: np.ndarray, ensemble_size: int
) -> float:
    """Ensemble diversity: (1/(N L^2)) * sum_j l_j (L - l_j), in [0, 0.25].

    correct_counts holds, per example, how many of the L ensemble members
    classify it correctly. The variance is zero when the members always
    agree (all correct or all wrong) and peaks when they split evenly.
    """
    counts = np.asarray(correct_counts, dtype=np.float64)
    n = counts.size
    if ensemble_size < 1:
        raise ValidationError("ensemble_size must be at least 1")
    if n == 0:
        raise ZeroSize("correct_counts is empty")
    if np.any((counts < 0) | (counts > ensemble_size)):
        raise ValidationError("correct counts must lie in [0, ensemble_size]")
    L = float(ensemble_size)
    return float((counts * (L - counts)).sum() / (n * L * L))


def clip_probabilities(p: np.ndarray, eps: float = DEFAULT_EPSILON_PROB) -> np.ndarray:
    """Clip probabilities to [eps, 1] and renormalize rows.

    Keeps logarithms finite for one-hot base outputs without disturbing the
    argmax (only entries below eps move, and eps < 1/K).
    """
    p = np.asarray(p, dtype=np.float64)
    clipped = np.clip(p, eps, 1.0)
    return clipped / clipped.sum(axis=-1, keepdims=True)


def class_prob_transform(
    p: np.ndarray, eps: float = DEFAULT_EPSILON_PROB
) -> np.ndarray:
    """Zero-sum log-probability scores:

        C_k = (K - 1) * (log p_k - mean_k' log p_k')

    Accepts a single vector or a row-per-example matrix; probabilities are
    clipped and renormalized first, so the scores stay finite.
    """
    p = np.asarray(p, dtype=np.float64)
    single = p.ndim == 1
    logp = np.log(clip_probabilities(np.atleast_2d(p), eps))
    k = logp.shape[1]
    scores = (k - 1) * (logp - logp.mean(axis=1, keepdims=True))
    return scores[0] if single else scores


def weight_update_factors(
    probs: np.ndarray,
    truths: np.ndarray,
    eps: float = DEFAULT_EPSILON_PROB,
) -> np.ndarray:
    """Per-example multiplicative weight update.

    With the coded true-label vector (+1 on the true class, -1/(K-1)
    elsewhere) the factor is

        exp(-((K-1)/K) * [log p_true - (1/(K-1)) * sum_{k != true} log p_k])

    which shrinks weights where the true class got high probability and
    grows them where it did not.
    """
    p = clip_probabilities(np.atleast_2d(probs), eps)
    truths = np.asarray(truths, dtype=np.int64)
    n, k = p.shape
    logp = np.log(p)
    true_log = logp[np.arange(n), truths]
    other_log = logp.sum(axis=1) - true_log
    coded = true_log - other_log / (k - 1)
    return np.exp(-((k - 1) / k) * coded)


def update_weights(
    w: np.ndarray,
    probs: np.ndarray,
    truths: np.ndarray,
    eps: float = DEFAULT_EPSILON_PROB,
) -> np.ndarray:
    """Apply the exponential update and renormalize to a distribution."""
    w = np.asarray(w, dtype=np.float64)
    return normalize_weights(w * weight_update_factors(probs, truths, eps))


@dataclass(frozen=True)
class BoostConfig:
    """Booster hyperparameters."""

    rounds: int
    wmse_stop: float | None = None
    epsilon_prob: float = DEFAULT_EPSILON_PROB
    alpha_floor: float = DEFAULT_ALPHA_FLOOR
    alpha_mode: str = "kw_diversity"

    def validate(self, class_count: int) -> None:
        if self.rounds < 1:
            raise ValidationError("rounds must be at least 1")
        if not 0.0 < self.epsilon_prob < 1.0 / class_count:
            raise ValidationError(
                f"epsilon_prob must lie in (0, 1/{class_count})"
            )
        if self.alpha_floor < 0.0:
            raise ValidationError("alpha_floor must be non-negative")
        if self.alpha_mode not in ("kw_diversity", "uniform"):
            raise ValidationError(f"unknown alpha_mode {self.alpha_mode!r}")

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "wmse_stop": self.wmse_stop,
            "epsilon_prob": self.epsilon_prob,
            "alpha_floor": self.alpha_floor,
            "alpha_mode": self.alpha_mode,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BoostConfig":
        return cls(
            rounds=int(doc["rounds"]),
            wmse_stop=doc.get("wmse_stop"),
            epsilon_prob=float(doc.get("epsilon_prob", DEFAULT_EPSILON_PROB)),
            alpha_floor=float(doc.get("alpha_floor", DEFAULT_ALPHA_FLOOR)),
            alpha_mode=doc.get("alpha_mode", "kw_diversity"),
        )


@dataclass(frozen=True)
class BaseLearnerParams:
    """Knobs forwarded to the per-round base learner."""

    radius: float | None = None
    auto_radius_factor: float = 0.5
    bandwidth: BandwidthSearchSpec | None = None
    bandwidth_sample: int = 0
    nn_sample: int = 1000

    def to_dict(self) -> dict:
        doc = {
            "radius": self.radius,
            "auto_radius_factor": self.auto_radius_factor,
            "bandwidth_sample": self.bandwidth_sample,
            "nn_sample": self.nn_sample,
        }
        if self.bandwidth is not None:
            doc["bandwidth"] = {
                "delta_min": self.bandwidth.delta_min,
                "delta_max": self.bandwidth.delta_max,
                "tolerance": self.bandwidth.tolerance,
                "max_evals": self.bandwidth.max_evals,
            }
        else:
            doc["bandwidth"] = None
        return doc


@dataclass(frozen=True)
class RoundRecord:
    """Per-round training log entry."""

    index: int
    wmse: float
    bandwidth: float
    cluster_count: int
    alpha_raw: float
    alpha: float
    weighted_error: float
    degenerate: bool

    def to_dict(self) -> dict:
        return {
            "round": self.index,
            "wmse": self.wmse,
            "bandwidth": self.bandwidth,
            "cluster_count": self.cluster_count,
            "alpha_raw": self.alpha_raw,
            "alpha": self.alpha,
            "weighted_error": self.weighted_error,
            "degenerate": self.degenerate,
        }

    def to_line(self) -> str:
        flag = " degenerate" if self.degenerate else ""
        return (
            f"round {self.index:3d}  wmse={self.wmse:.6g}  "
            f"bandwidth={self.bandwidth:.6g}  clusters={self.cluster_count}  "
            f"alpha_raw={self.alpha_raw:.6g}  alpha={self.alpha:.6g}  "
            f"weighted_error={self.weighted_error:.6g}{flag}"
        )


class BoostedModel:
    """Ordered base learners with their aggregation weights.

    Training rounds are inherently sequential (each depends on the previous
    distribution), but a finished model is immutable and safe to share for
    prediction.
    """

    def __init__(
        self,
        rounds: Sequence[tuple[VqGrnnModel, float]],
        class_count: int,
        config: BoostConfig,
        records: Sequence[RoundRecord] = (),
        alpha_raw: Sequence[float] = (),
    ):
        if not rounds:
            raise ValidationError("a boosted model needs at least one round")
        alphas = np.asarray([a for _, a in rounds], dtype=np.float64)
        if np.any(alphas < 0.0) or not np.any(alphas > 0.0):
            raise ValidationError(
                "aggregation weights must be non-negative with at least one positive"
            )
        self.rounds = list(rounds)
        self.class_count = int(class_count)
        self.config = config
        self.records = list(records)
        self.alpha_raw = list(alpha_raw)

    @property
    def width(self) -> int:
        return self.rounds[0][0].width

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        """Weighted sum of per-round zero-sum scores, one row per query."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.width:
            raise WidthMismatch(
                f"query width {X.shape[1]} does not match model width {self.width}"
            )
        scores = np.zeros((len(X), self.class_count))
        for base, alpha in self.rounds:
            if alpha == 0.0:
                continue
            proba = base.predict_proba(X)
            scores += alpha * class_prob_transform(proba, self.config.epsilon_prob)
        return scores

    def classify(self, X: np.ndarray) -> np.ndarray:
        """Argmax class per query; ties go to the lowest class index."""
        return np.argmax(self.decision_scores(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "kind": "boosted_misuse",
            "class_count": self.class_count,
            "alphas": [a for _, a in self.rounds],
            "alpha_raw": self.alpha_raw,
            "config": self.config.to_dict(),
            "rounds": [base.to_dict() for base, _ in self.rounds],
            "training_log": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BoostedModel":
        config = BoostConfig.from_dict(doc["config"])
        bases = [VqGrnnModel.from_dict(d) for d in doc["rounds"]]
        records = [
            RoundRecord(
                index=r["round"],
                wmse=r["wmse"],
                bandwidth=r["bandwidth"],
                cluster_count=r["cluster_count"],
                alpha_raw=r["alpha_raw"],
                alpha=r["alpha"],
                weighted_error=r["weighted_error"],
                degenerate=r["degenerate"],
            )
            for r in doc.get("training_log", [])
        ]
        return cls(
            rounds=list(zip(bases, [float(a) for a in doc["alphas"]])),
            class_count=int(doc["class_count"]),
            config=config,
            records=records,
            alpha_raw=[float(a) for a in doc.get("alpha_raw", [])],
        )


def predict_ensemble(model: BoostedModel, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Class index and score vector for a single query."""
    scores = model.decision_scores(np.asarray(x)[None, :])[0]
    return int(np.argmax(scores)), scores


def train_booster(
    X: np.ndarray,
    y: np.ndarray,
    *,
    class_count: int,
    config: BoostConfig,
    base_params: BaseLearnerParams = BaseLearnerParams(),
    seed: int = 0,
) -> BoostedModel:
    """Run the boosting loop and return the aggregated classifier.

    Round t trains the base learner on the current distribution, records
    which examples the ensemble members classify correctly, updates the
    distribution with the coded-label exponential rule, and assigns the
    next round's raw aggregation weight from the Kohavi-Wolpert variance of
    the rounds so far. Stops early when the unweighted ensemble WMSE on the
    training set falls below ``config.wmse_stop`` (when set).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyDataset("train_booster needs a non-empty 2-D sample")
    y = np.asarray(y, dtype=np.int64)
    if class_count < 2:
        raise ValidationError("boosting needs at least two classes")
    config.validate(class_count)

    n = len(X)
    w = init_distribution(n)
    targets = np.eye(class_count)[y]

    # geometry-derived defaults are resolved once; only weights change per round
    nn_scale = vq_grnn.median_nn_distance(
        X, sample_size=base_params.nn_sample, seed=seed
    )
    radius = base_params.radius
    if radius is None:
        radius = base_params.auto_radius_factor * nn_scale
    spec = base_params.bandwidth
    if spec is None:
        spec = vq_grnn.default_bandwidth_spec(radius, nn_scale)

    correct = np.zeros(n)
    alpha_next = 1.0
    rounds: list[tuple[VqGrnnModel, float]] = []
    records: list[RoundRecord] = []
    alpha_raw_seq: list[float] = []
    ens_proba = np.zeros((n, class_count))
    ens_alpha = 0.0

    for t in range(1, config.rounds + 1):
        base = vq_grnn.train_base(
            X,
            y,
            w,
            class_count=class_count,
            radius=radius,
            bandwidth_spec=spec,
            bandwidth_sample=base_params.bandwidth_sample,
            seed=seed,
        )
        proba = base.predict_proba(X)
        preds = np.argmax(proba, axis=1)
        correct += preds == y

        alpha_raw = alpha_next
        if config.alpha_mode == "uniform":
            alpha = 1.0
        else:
            alpha = max(alpha_raw, config.alpha_floor)
        weighted_error = float(w[preds != y].sum())
        degenerate = np.unique(preds).size == 1
        base_wmse = float(
            ((w * w) * ((proba - targets) ** 2).sum(axis=1)).sum() / n
        )
        record = RoundRecord(
            index=t,
            wmse=base_wmse,
            bandwidth=base.bandwidth,
            cluster_count=len(base.clusters),
            alpha_raw=alpha_raw,
            alpha=alpha,
            weighted_error=weighted_error,
            degenerate=degenerate,
        )
        if degenerate:
            logger.warning(
                "round %d base learner is degenerate (predicts one class)", t
            )
        logger.info("%s", record.to_line())
        records.append(record)
        rounds.append((base, alpha))
        alpha_raw_seq.append(alpha_raw)

        alpha_next = kohavi_wolpert_variance(correct, t)
        w = update_weights(w, proba, y, config.epsilon_prob)

        if config.wmse_stop is not None:
            ens_proba += alpha * proba
            ens_alpha += alpha
            ens_wmse = float(
                ((ens_proba / ens_alpha - targets) ** 2).sum(axis=1).mean()
            )
            if ens_wmse < config.wmse_stop:
                logger.info(
                    "stopping after round %d: ensemble wmse %.6g below %.6g",
                    t, ens_wmse, config.wmse_stop,
                )
                break

    return BoostedModel(
        rounds=rounds,
        class_count=class_count,
        config=config,
        records=records,
        alpha_raw=alpha_raw_seq,
    )
