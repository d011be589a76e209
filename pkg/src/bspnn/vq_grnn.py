"""Weighted vector-quantized kernel-mixture classifier.

Training makes a single online pass over the data, merging each vector into
the nearest existing cluster of its own class when it lies within a
quantization radius, otherwise founding a new cluster at the vector. Cluster
centers are weighted means of their members, so the compressed model honors
the example weights a booster assigns.

Prediction places one Gaussian kernel per cluster center and returns the
count-weighted kernel mixture

    p(x) = sum_i Z_i y_i exp(-||x - c_i||^2 / (2 delta^2)) / sum_i Z_i exp(...)

which is a convex combination of the cluster output vectors, hence a proper
probability vector when clustering is per-class (one-hot outputs). Kernels
are evaluated with a per-query max shift so far-away queries cannot
underflow the denominator; if every squared distance overflows, the global
class prior of the clusters is returned instead.

The single shared bandwidth is fitted by golden-section search on log
bandwidth, minimizing weighted mean squared error over the training data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import (
    EmptyDataset,
    NonPositiveBandwidth,
    SearchSpaceInvalid,
    ValidationError,
    WidthMismatch,
    ZeroTotalWeight,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# Memory ceilings for kernel evaluation.
_CHUNK_ENTRIES = 4_000_000
_CACHE_BUDGET_BYTES = 2 << 30


def rbf_kernel(x: np.ndarray, c: np.ndarray, delta: float) -> float:
    """Gaussian kernel exp(-||x - c||^2 / (2 delta^2)), in (0, 1]."""
    if delta <= 0.0 or delta * delta == 0.0:
        raise NonPositiveBandwidth(f"bandwidth must be > 0, got {delta}")
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if x.shape != c.shape:
        raise WidthMismatch(f"vector widths differ: {x.shape} vs {c.shape}")
    d = x - c
    return float(np.exp(-(d @ d) / (2.0 * delta * delta)))


def cluster_center(members: Iterable[tuple[np.ndarray, float]]) -> np.ndarray:
    """Weighted mean of member vectors: sum(w_i x_i) / sum(w_i)."""
    vectors, weights = [], []
    for x, w in members:
        vectors.append(np.asarray(x, dtype=np.float64))
        weights.append(float(w))
    if not vectors:
        raise EmptyDataset("cluster_center needs at least one member")
    w = np.asarray(weights)
    total = w.sum()
    if total <= 0.0:
        raise ZeroTotalWeight("member weights sum to zero")
    # normalizing first keeps the single-member case exact (w/w is 1.0)
    return ((w / total)[:, None] * np.stack(vectors)).sum(axis=0)


@dataclass(frozen=True)
class Cluster:
    """One quantization center with its member count and output vector."""

    center: np.ndarray
    count: int
    weight_sum: float
    output: np.ndarray


class ClusterSet:
    """Columnar storage for a list of clusters."""

    def __init__(
        self,
        centers: np.ndarray,
        counts: np.ndarray,
        weight_sums: np.ndarray,
        outputs: np.ndarray,
    ):
        self.centers = np.asarray(centers, dtype=np.float64)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.weight_sums = np.asarray(weight_sums, dtype=np.float64)
        self.outputs = np.asarray(outputs, dtype=np.float64)
        if not (
            len(self.centers) == len(self.counts)
            == len(self.weight_sums) == len(self.outputs)
        ):
            raise ValidationError("cluster columns have mismatched lengths")

    def __len__(self) -> int:
        return len(self.counts)

    def __getitem__(self, i: int) -> Cluster:
        return Cluster(
            center=self.centers[i].copy(),
            count=int(self.counts[i]),
            weight_sum=float(self.weight_sums[i]),
            output=self.outputs[i].copy(),
        )

    @property
    def width(self) -> int:
        return self.centers.shape[1]

    @property
    def class_count(self) -> int:
        return self.outputs.shape[1]

    def class_prior(self) -> np.ndarray:
        """Count-weighted mean of cluster outputs."""
        z = self.counts.astype(np.float64)
        return (z @ self.outputs) / z.sum()

    def to_dict(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "counts": self.counts.tolist(),
            "weight_sums": self.weight_sums.tolist(),
            "outputs": self.outputs.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ClusterSet":
        return cls(
            centers=np.asarray(doc["centers"], dtype=np.float64),
            counts=np.asarray(doc["counts"], dtype=np.int64),
            weight_sums=np.asarray(doc["weight_sums"], dtype=np.float64),
            outputs=np.asarray(doc["outputs"], dtype=np.float64),
        )


class _PoolBuilder:
    """Growable cluster pool for one class (or the shared pool)."""

    def __init__(self, width: int, class_count: int):
        cap = 16
        self.centers = np.empty((cap, width))
        self.norms = np.empty(cap)
        self.counts = np.zeros(cap, dtype=np.int64)
        self.weight_sums = np.zeros(cap)
        self.out_wsums = np.zeros((cap, class_count))
        self.out_counts = np.zeros((cap, class_count))
        self.xsums = np.zeros((cap, width))
        self.size = 0
        self.order: list[int] = []  # global cluster ids, in founding order

    def _grow(self):
        cap = self.centers.shape[0] * 2
        for name in ("centers", "norms", "counts", "weight_sums", "out_wsums",
                     "out_counts", "xsums"):
            arr = getattr(self, name)
            new = np.zeros((cap,) + arr.shape[1:], dtype=arr.dtype)
            new[: self.size] = arr[: self.size]
            setattr(self, name, new)

    def nearest(self, x: np.ndarray, x_norm: float) -> tuple[int, float]:
        """Index and exact squared distance of the nearest center."""
        m = self.size
        d2 = self.norms[:m] - 2.0 * (self.centers[:m] @ x) + x_norm
        j = int(np.argmin(d2))
        diff = x - self.centers[j]
        return j, float(diff @ diff)

    def join(self, j: int, x: np.ndarray, w: float, onehot: np.ndarray):
        ws_new = self.weight_sums[j] + w
        self.xsums[j] += x
        self.counts[j] += 1
        if ws_new > 0.0:
            if self.weight_sums[j] > 0.0:
                self.centers[j] = (
                    self.weight_sums[j] * self.centers[j] + w * x
                ) / ws_new
            else:
                # all previous members carried zero weight; they drop out
                self.centers[j] = x
        else:
            # still no weight mass: fall back to the plain mean
            self.centers[j] = self.xsums[j] / self.counts[j]
        self.weight_sums[j] = ws_new
        self.norms[j] = self.centers[j] @ self.centers[j]
        self.out_wsums[j] += w * onehot
        self.out_counts[j] += onehot

    def found(self, x: np.ndarray, w: float, onehot: np.ndarray, global_id: int):
        if self.size == self.centers.shape[0]:
            self._grow()
        j = self.size
        self.centers[j] = x
        self.norms[j] = x @ x
        self.counts[j] = 1
        self.weight_sums[j] = w
        self.out_wsums[j] = w * onehot
        self.out_counts[j] = onehot.astype(np.float64)
        self.xsums[j] = x
        self.size += 1
        self.order.append(global_id)


def quantize(
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray | None,
    radius: float,
    class_count: int,
    per_class: bool = True,
) -> ClusterSet:
    """Single-pass online quantization of the training set.

    Each vector, in data order, joins the nearest existing cluster of its
    own class (or of any class when per_class is False) if its Euclidean
    distance to that center is at most ``radius``; otherwise it founds a new
    cluster. Centers are maintained as weighted means of their members;
    members with zero total weight fall back to the plain mean. The summed
    cluster counts always equal the number of training vectors.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataset("quantize needs a non-empty 2-D sample")
    y = np.asarray(y, dtype=np.int64)
    n, width = X.shape
    if weights is None:
        weights = np.full(n, 1.0 / n)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (n,):
        raise ValidationError("weights must be one entry per record")
    if np.any(weights < 0.0):
        raise ValidationError("weights must be non-negative")
    if weights.sum() <= 0.0:
        raise ZeroTotalWeight("weights must have positive sum")
    if radius < 0.0:
        raise ValidationError("radius must be non-negative")
    if np.any((y < 0) | (y >= class_count)):
        raise ValidationError("labels outside [0, class_count)")

    eye = np.eye(class_count)
    pools: dict[int, _PoolBuilder] = {}
    x_norms = np.einsum("ij,ij->i", X, X)
    r2 = radius * radius
    next_id = 0
    for i in range(n):
        key = int(y[i]) if per_class else -1
        pool = pools.get(key)
        if pool is None:
            pool = pools[key] = _PoolBuilder(width, class_count)
        x = X[i]
        onehot = eye[y[i]]
        if pool.size:
            j, d2 = pool.nearest(x, x_norms[i])
            if d2 <= r2:
                pool.join(j, x, weights[i], onehot)
                continue
        pool.found(x, weights[i], onehot, next_id)
        next_id += 1

    # reassemble in global founding order so output is order-deterministic
    total = sum(p.size for p in pools.values())
    centers = np.empty((total, width))
    counts = np.empty(total, dtype=np.int64)
    weight_sums = np.empty(total)
    outputs = np.empty((total, class_count))
    for pool in pools.values():
        for j in range(pool.size):
            g = pool.order[j]
            centers[g] = pool.centers[j]
            counts[g] = pool.counts[j]
            weight_sums[g] = pool.weight_sums[j]
            if per_class:
                outputs[g] = pool.out_counts[j] / pool.counts[j]
            elif pool.weight_sums[j] > 0.0:
                outputs[g] = pool.out_wsums[j] / pool.weight_sums[j]
            else:
                outputs[g] = pool.out_counts[j] / pool.counts[j]
    return ClusterSet(centers, counts, weight_sums, outputs)


def _squared_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at zero."""
    a2 = np.einsum("ij,ij->i", A, A)[:, None]
    b2 = np.einsum("ij,ij->i", B, B)[None, :]
    d2 = a2 + b2 - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _mixture_proba(
    clusters: ClusterSet,
    Xq: np.ndarray,
    delta: float,
    d2: np.ndarray | None = None,
) -> np.ndarray:
    """Kernel-mixture probabilities for a block of queries.

    Kernels are shifted by the per-query maximum log kernel before
    exponentiation; the shift cancels in the ratio, so the denominator
    stays at or above the largest cluster count. Queries whose squared
    distances all overflow to infinity receive the class prior.
    """
    if d2 is None:
        d2 = _squared_distances(Xq, clusters.centers)
    s = d2 * (-1.0 / (2.0 * delta * delta))
    m = s.max(axis=1, keepdims=True)
    dead = ~np.isfinite(m[:, 0])
    if dead.any():
        s = np.where(dead[:, None], 0.0, s)
        m = np.where(dead[:, None], 0.0, m)
    f = np.exp(s - m)
    f *= clusters.counts.astype(np.float64)
    num = f @ clusters.outputs
    proba = num / num.sum(axis=1, keepdims=True)
    if dead.any():
        proba[dead] = clusters.class_prior()
    return proba


def _chunk_rows(n_queries: int, n_clusters: int) -> int:
    return max(1, min(n_queries, _CHUNK_ENTRIES // max(1, n_clusters)))


class VqGrnnModel:
    """Fitted kernel-mixture classifier over quantization clusters.

    Immutable after construction; safe to share across threads for
    prediction.
    """

    def __init__(
        self,
        clusters: ClusterSet,
        bandwidth: float,
        class_count: int,
        radius: float,
    ):
        if bandwidth <= 0.0 or bandwidth * bandwidth == 0.0:
            raise NonPositiveBandwidth(f"bandwidth must be > 0, got {bandwidth}")
        if clusters.class_count != class_count:
            raise ValidationError("cluster output width disagrees with class_count")
        self.clusters = clusters
        self.bandwidth = float(bandwidth)
        self.class_count = int(class_count)
        self.radius = float(radius)

    @property
    def width(self) -> int:
        return self.clusters.width

    def _check_width(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.width:
            raise WidthMismatch(
                f"query width {X.shape[1]} does not match model width {self.width}"
            )
        return X

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Class probabilities, one row per query."""
        X = self._check_width(X)
        step = _chunk_rows(len(X), len(self.clusters))
        blocks = [
            _mixture_proba(self.clusters, X[i : i + step], self.bandwidth)
            for i in range(0, len(X), step)
        ]
        return np.vstack(blocks) if blocks else np.empty((0, self.class_count))

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Probability vector for a single query."""
        return self.predict_proba(np.asarray(x)[None, :])[0]

    def classify(self, X: np.ndarray) -> np.ndarray:
        """Argmax class per query; ties go to the lowest class index."""
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "kind": "vq_grnn",
            "class_count": self.class_count,
            "bandwidth": self.bandwidth,
            "radius": self.radius,
            "clusters": self.clusters.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "VqGrnnModel":
        return cls(
            clusters=ClusterSet.from_dict(doc["clusters"]),
            bandwidth=float(doc["bandwidth"]),
            class_count=int(doc["class_count"]),
            radius=float(doc["radius"]),
        )


def wmse(
    model: VqGrnnModel,
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray | None = None,
) -> float:
    """Weighted mean squared error with the weight inside the square:

        (1/N) * sum_i || w_i * (p(x_i) - onehot(y_i)) ||^2
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = len(X)
    if weights is None:
        weights = np.ones(n)
    weights = np.asarray(weights, dtype=np.float64)
    proba = model.predict_proba(X)
    targets = np.eye(model.class_count)[y]
    err = ((proba - targets) ** 2).sum(axis=1)
    return float((weights * weights * err).sum() / n)


@dataclass(frozen=True)
class BandwidthSearchSpec:
    """Golden-section search window for the kernel bandwidth."""

    delta_min: float
    delta_max: float
    tolerance: float = 1e-3
    max_evals: int = 100

    def validate(self) -> None:
        if not (0.0 < self.delta_min < self.delta_max):
            raise SearchSpaceInvalid(
                f"need 0 < delta_min < delta_max, got "
                f"[{self.delta_min}, {self.delta_max}]"
            )
        if self.tolerance <= 0.0:
            raise SearchSpaceInvalid("tolerance must be > 0")
        if self.max_evals < 4:
            raise SearchSpaceInvalid("max_evals must be at least 4")


class _BandwidthObjective:
    """Training WMSE as a function of bandwidth, with cached distances.

    Squared distances from the training data to the cluster centers do not
    depend on the bandwidth, so they are computed once (in row chunks) and
    reused across search evaluations while they fit the memory budget.
    """

    def __init__(
        self,
        clusters: ClusterSet,
        X: np.ndarray,
        y: np.ndarray,
        weights: np.ndarray,
        cache_budget: int = _CACHE_BUDGET_BYTES,
    ):
        self.clusters = clusters
        self.X = X
        self.targets = np.eye(clusters.class_count)[y]
        self.w2 = weights * weights
        self.n = len(X)
        self.step = _chunk_rows(self.n, len(clusters))
        self._cache: list[np.ndarray] | None = None
        if self.n * len(clusters) * 8 <= cache_budget:
            self._cache = [
                _squared_distances(X[i : i + self.step], clusters.centers)
                for i in range(0, self.n, self.step)
            ]

    def __call__(self, delta: float) -> float:
        acc = 0.0
        for block, i in enumerate(range(0, self.n, self.step)):
            d2 = self._cache[block] if self._cache is not None else None
            proba = _mixture_proba(self.clusters, self.X[i : i + self.step],
                                   delta, d2=d2)
            err = ((proba - self.targets[i : i + self.step]) ** 2).sum(axis=1)
            acc += float((self.w2[i : i + self.step] * err).sum())
        return acc / self.n


def fit_bandwidth(
    clusters: ClusterSet,
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray | None,
    spec: BandwidthSearchSpec,
) -> float:
    """Bandwidth minimizing training WMSE, by golden-section on log delta.

    Both interval endpoints are evaluated in addition to the interior
    probes, so the returned bandwidth never loses to either endpoint. The
    search stops at the relative interval tolerance or the evaluation
    budget, whichever comes first, and returns the best bandwidth actually
    evaluated (ties to the smaller value). Deterministic for fixed inputs.
    """
    spec.validate()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = len(X)
    if n == 0:
        raise EmptyDataset("fit_bandwidth needs data")
    if weights is None:
        weights = np.full(n, 1.0 / n)
    weights = np.asarray(weights, dtype=np.float64)

    objective = _BandwidthObjective(clusters, X, y, weights)
    evaluated: list[tuple[float, float]] = []

    def g(u: float) -> float:
        value = objective(math.exp(u))
        evaluated.append((value, u))
        return value

    a, b = math.log(spec.delta_min), math.log(spec.delta_max)
    g(a)
    g(b)
    c = b - (b - a) * GOLDEN
    d = a + (b - a) * GOLDEN
    fc, fd = g(c), g(d)
    width_tol = math.log1p(spec.tolerance)
    while (b - a) > width_tol and len(evaluated) < spec.max_evals:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - (b - a) * GOLDEN
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) * GOLDEN
            fd = g(d)
    best_value, best_u = min(evaluated, key=lambda t: (t[0], t[1]))
    return math.exp(best_u)


def median_nn_distance(
    X: np.ndarray, sample_size: int = 1000, seed: int = 0
) -> float:
    """Median positive nearest-neighbor distance over a data sample.

    Duplicate-heavy data would drive the plain median to zero, which
    degenerates every radius and bandwidth default built on it, so exact
    duplicates are excluded from the median. Returns 0.0 when the sample
    holds fewer than two distinct points.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if n < 2:
        return 0.0
    if n > sample_size:
        idx = np.random.default_rng(seed).choice(n, size=sample_size, replace=False)
        S = X[np.sort(idx)]
    else:
        S = X
    d2 = _squared_distances(S, S)
    np.fill_diagonal(d2, np.inf)
    nn = np.sqrt(d2.min(axis=1))
    positive = nn[nn > 0.0]
    if positive.size == 0:
        return 0.0
    return float(np.median(positive))


def default_bandwidth_spec(
    radius: float, reference_scale: float, tolerance: float = 1e-3,
    max_evals: int = 100,
) -> BandwidthSearchSpec:
    """Default search window spanning two decades around the data scale."""
    r_eff = max(radius, reference_scale)
    if r_eff <= 0.0:
        r_eff = 1.0
    return BandwidthSearchSpec(
        delta_min=1e-2 * r_eff,
        delta_max=1e2 * r_eff,
        tolerance=tolerance,
        max_evals=max_evals,
    )


def train_base(
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray | None = None,
    *,
    class_count: int,
    radius: float | None = None,
    auto_radius_factor: float = 0.5,
    bandwidth_spec: BandwidthSearchSpec | None = None,
    bandwidth_sample: int = 0,
    nn_sample: int = 1000,
    seed: int = 0,
) -> VqGrnnModel:
    """Quantize the weighted sample and fit the shared bandwidth.

    With radius=None the quantization radius defaults to
    auto_radius_factor times the median nearest-neighbor distance of a
    training sample. bandwidth_sample > 0 restricts the WMSE evaluations of
    the bandwidth search to a deterministic subsample of that size (the
    clusters still come from the full data).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyDataset("train_base needs a non-empty 2-D sample")
    y = np.asarray(y, dtype=np.int64)
    n = len(X)
    if weights is None:
        weights = np.full(n, 1.0 / n)
    weights = np.asarray(weights, dtype=np.float64)
    total = weights.sum()
    if total <= 0.0:
        raise ZeroTotalWeight("weights must have positive sum")
    weights = weights / total

    nn_scale = None
    if radius is None or bandwidth_spec is None:
        nn_scale = median_nn_distance(X, sample_size=nn_sample, seed=seed)
    if radius is None:
        radius = auto_radius_factor * nn_scale
    clusters = quantize(X, y, weights, radius, class_count)
    if bandwidth_spec is None:
        bandwidth_spec = default_bandwidth_spec(radius, nn_scale)

    fit_X, fit_y, fit_w = X, y, weights
    if 0 < bandwidth_sample < n:
        idx = np.sort(
            np.random.default_rng(seed).choice(n, size=bandwidth_sample, replace=False)
        )
        fit_X, fit_y, fit_w = X[idx], y[idx], weights[idx]
    bandwidth = fit_bandwidth(clusters, fit_X, fit_y, fit_w, bandwidth_spec)
    return VqGrnnModel(
        clusters=clusters,
        bandwidth=bandwidth,
        class_count=class_count,
        radius=radius,
    )
