"""Construction of the experiment datasets.

From a labeled source file this module builds the all-normal pool, the 13
known-intrusion clusters, and the incremental training sets obtained by
adding clusters to the normal pool one at a time (stage k holds the normal
pool plus clusters 1..k).

Datasets keep the raw CSV line per record alongside its mapped label, so
splits and concatenations are byte-preserving and cheap; full field parsing
happens only when records are encoded for training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ingest
from .errors import (
    DataError,
    IndexOutOfRange,
    UncoveredAttackName,
    ValidationError,
)
from .ingest import (
    CATEGORIES,
    CATEGORY_DISPLAY,
    N_CATEGORIES,
    NORMAL,
    RawRecord,
    open_maybe_gzip,
    strip_label,
)

N_CLUSTERS = 13


@dataclass
class LabeledDataset:
    """Parallel record lines, attack names, and category indices."""

    lines: list[str]
    attack_names: list[str]
    categories: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.categories = np.asarray(self.categories, dtype=np.int8)
        if not (len(self.lines) == len(self.attack_names) == len(self.categories)):
            raise ValidationError("dataset columns have mismatched lengths")

    def __len__(self) -> int:
        return len(self.lines)

    def take(self, indices: Sequence[int], provenance: str) -> "LabeledDataset":
        idx = list(indices)
        return LabeledDataset(
            lines=[self.lines[i] for i in idx],
            attack_names=[self.attack_names[i] for i in idx],
            categories=self.categories[idx] if idx else np.empty(0, dtype=np.int8),
            provenance=provenance,
        )

    def concat(self, other: "LabeledDataset", provenance: str) -> "LabeledDataset":
        return LabeledDataset(
            lines=self.lines + other.lines,
            attack_names=self.attack_names + other.attack_names,
            categories=np.concatenate([self.categories, other.categories]),
            provenance=provenance,
        )

    def parse_records(self, schema: Sequence[str]) -> list[RawRecord]:
        """Full parse of every line, with numeric-column validation."""
        # parse with an empty schema (field split only); the numeric check
        # runs vectorized over whole columns afterwards
        records = [ingest.parse_kdd_record(line, ()) for line in self.lines]
        ingest.validate_numeric_columns(records, schema, self.provenance or "dataset")
        return records


def load_labeled_dataset(
    path: str,
    category_map: dict[str, int],
    provenance: str | None = None,
    policy: str = "strict",
) -> LabeledDataset:
    """Read a KDD CSV file and map every label to its category.

    Only the label field is parsed here; lines are kept verbatim. With
    policy="drop", records whose attack name is unmapped are skipped.
    """
    lines: list[str] = []
    names: list[str] = []
    categories: list[int] = []
    with open_maybe_gzip(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            if line.count(",") != ingest.N_FEATURES:
                raise DataError(
                    f"{path}:{lineno}: expected {ingest.N_FEATURES + 1} "
                    "comma-separated fields"
                )
            name = strip_label(line.rsplit(",", 1)[1].strip())
            label = ingest.map_label(name, category_map, policy=policy)
            if label is None:
                continue
            lines.append(line)
            names.append(name)
            categories.append(label.category)
    return LabeledDataset(
        lines=lines,
        attack_names=names,
        categories=np.asarray(categories, dtype=np.int8),
        provenance=provenance or path,
    )


def write_dataset(ds: LabeledDataset, path: str) -> None:
    """Write a dataset back to CSV (gzip-compressed when path ends in .gz)."""
    with open_maybe_gzip(path, "wt") as fh:
        for line in ds.lines:
            fh.write(line)
            fh.write("\n")


@dataclass(frozen=True)
class ClusterTable:
    """Ordered known-intrusion clusters: 13 disjoint attack-name lists."""

    clusters: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if len(self.clusters) != N_CLUSTERS:
            raise ValidationError(
                f"cluster table has {len(self.clusters)} clusters, expected {N_CLUSTERS}"
            )
        seen: set[str] = set()
        for i, names in enumerate(self.clusters, 1):
            if not names:
                raise ValidationError(f"cluster {i} is empty")
            overlap = seen & set(names)
            if overlap:
                raise ValidationError(
                    f"cluster {i} repeats attack names {sorted(overlap)}"
                )
            seen.update(names)

    @property
    def all_names(self) -> set[str]:
        return {name for names in self.clusters for name in names}


def load_cluster_table(path: str) -> ClusterTable:
    """Parse the "C<i>: name[,name...]" cluster file (13 lines, in order)."""
    rows: list[tuple[str, ...]] = []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                head, body = line.split(":", 1)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: missing ':'") from None
            expected = f"C{len(rows) + 1}"
            if head.strip() != expected:
                raise ValidationError(
                    f"{path}:{lineno}: expected cluster id {expected}, got {head.strip()!r}"
                )
            names = tuple(n.strip() for n in body.split(",") if n.strip())
            rows.append(names)
    return ClusterTable(clusters=tuple(rows))


def filter_normal(ds: LabeledDataset) -> LabeledDataset:
    """Keep exactly the records labeled normal, order preserved."""
    idx = np.flatnonzero(ds.categories == NORMAL)
    return ds.take(idx.tolist(), provenance="Norm")


def build_clusters(ds: LabeledDataset, table: ClusterTable) -> list[LabeledDataset]:
    """Split the attack records of ds into the 13 intrusion clusters.

    Every attack record must belong to some cluster; an attack name outside
    the table raises UncoveredAttackName.
    """
    name_to_cluster = {
        name: i for i, names in enumerate(table.clusters) for name in names
    }
    member_indices: list[list[int]] = [[] for _ in range(N_CLUSTERS)]
    for i, (name, category) in enumerate(zip(ds.attack_names, ds.categories)):
        if category == NORMAL:
            continue
        ci = name_to_cluster.get(name)
        if ci is None:
            raise UncoveredAttackName(
                f"attack {name!r} is not assigned to any intrusion cluster"
            )
        member_indices[ci].append(i)
    return [
        ds.take(idx, provenance=f"C{ci + 1}")
        for ci, idx in enumerate(member_indices)
    ]


def build_incremental(
    norm: LabeledDataset, clusters: Sequence[LabeledDataset], k: int
) -> LabeledDataset:
    """Concatenate the normal pool with clusters 1..k, in that fixed order."""
    if not 1 <= k <= len(clusters):
        raise IndexOutOfRange(f"stage {k} outside [1, {len(clusters)}]")
    out = norm
    for i in range(k):
        out = out.concat(clusters[i], provenance=f"D{k}")
    return out


@dataclass(frozen=True)
class DatasetSummary:
    """Per-category record counts plus the attack/normal totals."""

    provenance: str
    counts: tuple[int, ...]  # indexed by category

    @property
    def total_normal(self) -> int:
        return self.counts[NORMAL]

    @property
    def total_attack(self) -> int:
        return sum(self.counts) - self.counts[NORMAL]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def to_dict(self) -> dict:
        doc = {name: self.counts[i] for i, name in enumerate(CATEGORIES)}
        doc["total_attack"] = self.total_attack
        doc["total"] = self.total
        doc["provenance"] = self.provenance
        return doc

    def to_text(self) -> str:
        header = f"{'Dataset':<16}" + "".join(f"{n:>10}" for n in CATEGORY_DISPLAY)
        header += f"{'Attack':>12}{'Total':>12}"
        row = f"{self.provenance:<16}" + "".join(
            f"{self.counts[i]:>10}" for i in range(N_CATEGORIES)
        )
        row += f"{self.total_attack:>12}{self.total:>12}"
        return header + "\n" + row


def summarize(ds: LabeledDataset) -> DatasetSummary:
    """Count records per category."""
    counts = np.bincount(ds.categories, minlength=N_CATEGORIES) if len(ds) else np.zeros(
        N_CATEGORIES, dtype=np.int64
    )
    return DatasetSummary(
        provenance=ds.provenance, counts=tuple(int(c) for c in counts)
    )


def summarize_file(path: str, category_map: dict[str, int]) -> DatasetSummary:
    """Streaming per-category counts of a KDD CSV file (no materialization)."""
    counts = [0] * N_CATEGORIES
    with open_maybe_gzip(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            name = strip_label(line.rsplit(",", 1)[1].strip())
            label = ingest.map_label(name, category_map)
            counts[label.category] += 1
    return DatasetSummary(provenance=path, counts=tuple(counts))


def subsample(
    ds: LabeledDataset, caps: Sequence[int | None], seed: int
) -> LabeledDataset:
    """Stratified uniform sample without replacement, one cap per category.

    A cap of None (or any cap at or above the category size) keeps the whole
    category. Selected records keep their original relative order, so the
    result is reproducible and nesting-friendly.
    """
    if len(caps) != N_CATEGORIES:
        raise ValidationError(f"expected {N_CATEGORIES} caps, got {len(caps)}")
    for cap in caps:
        if cap is not None and cap < 0:
            raise ValidationError("caps must be non-negative")
    rng = np.random.default_rng(seed)
    keep: list[np.ndarray] = []
    for c in range(N_CATEGORIES):
        idx = np.flatnonzero(ds.categories == c)
        cap = caps[c]
        if cap is None or cap >= idx.size:
            keep.append(idx)
        elif cap > 0:
            keep.append(rng.choice(idx, size=cap, replace=False))
    selected = np.sort(np.concatenate(keep)) if keep else np.empty(0, dtype=np.int64)
    return ds.take(selected.tolist(), provenance=f"{ds.provenance}|sampled")


def shuffle_dataset(ds: LabeledDataset, seed: int) -> LabeledDataset:
    """Deterministic global shuffle (applied before training)."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ds))
    return ds.take(order.tolist(), provenance=ds.provenance)
