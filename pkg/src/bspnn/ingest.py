"""KDD-99 connection record parsing and numeric feature encoding.

Records are comma-separated lines with 41 feature fields plus a label whose
trailing period is stripped ("smurf." -> "smurf"). Symbolic columns are
one-hot encoded with vocabularies built in first-seen order on the training
set; continuous columns are z-scored with training-set mean and population
standard deviation. An :class:`Encoder` is immutable once fitted and safe to
share across threads.
"""

from __future__ import annotations

import csv
import gzip
import io
import sys
from dataclasses import dataclass
from importlib import resources
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    EmptyDataset,
    FieldCountMismatch,
    MalformedNumeric,
    UnknownAttackName,
    ValidationError,
)

N_FEATURES = 41

CONTINUOUS = "continuous"
SYMBOLIC = "symbolic"

CATEGORIES = ("normal", "probe", "dos", "u2r", "r2l")
CATEGORY_INDEX = {name: i for i, name in enumerate(CATEGORIES)}
CATEGORY_DISPLAY = ("Normal", "Probe", "DoS", "U2R", "R2L")
N_CATEGORIES = len(CATEGORIES)
NORMAL = CATEGORY_INDEX["normal"]


@dataclass(frozen=True, slots=True)
class RawRecord:
    """One parsed connection record: 41 text fields and a clean label."""

    features: tuple[str, ...]
    label: str


@dataclass(frozen=True, slots=True)
class ClassLabel:
    """Attack name mapped to one of the five detection categories."""

    category: int
    attack_name: str

    @property
    def category_name(self) -> str:
        return CATEGORIES[self.category]


def default_asset(name: str) -> str:
    """Path of a packaged data asset (schema, category map, ...)."""
    return str(resources.files("bspnn.assets") / name)


def load_schema(path: str) -> list[str]:
    """Load the 41-line column-kind file ("continuous" | "symbolic")."""
    with open(path, encoding="ascii") as fh:
        kinds = [line.strip() for line in fh if line.strip()]
    if len(kinds) != N_FEATURES:
        raise ValidationError(
            f"schema file {path!r} has {len(kinds)} entries, expected {N_FEATURES}"
        )
    bad = sorted({k for k in kinds} - {CONTINUOUS, SYMBOLIC})
    if bad:
        raise ValidationError(f"schema file {path!r} has unknown column kinds: {bad}")
    return kinds


def load_category_map(path: str) -> dict[str, int]:
    """Load the "name,category" map and validate the category names."""
    mapping: dict[str, int] = {}
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                name, category = line.split(",")
            except ValueError:
                raise ValidationError(
                    f"{path}:{lineno}: expected 'name,category', got {line!r}"
                ) from None
            category = category.strip().lower()
            if category not in CATEGORY_INDEX:
                raise ValidationError(
                    f"{path}:{lineno}: unknown category {category!r} "
                    f"(expected one of {CATEGORIES})"
                )
            mapping[name.strip()] = CATEGORY_INDEX[category]
    if mapping.get("normal") != NORMAL:
        raise ValidationError(f"category map {path!r} must map 'normal' to 'normal'")
    return mapping


def strip_label(raw: str) -> str:
    """Remove the trailing period KDD labels carry ("normal." -> "normal")."""
    return raw[:-1] if raw.endswith(".") else raw


def parse_kdd_record(line: str, schema: Sequence[str]) -> RawRecord:
    """Parse one comma-separated record (41 features + label).

    Raises FieldCountMismatch when the field count is not 42 and
    MalformedNumeric (with the column index) when a continuous column does
    not parse as a number.
    """
    fields = next(csv.reader(io.StringIO(line)))
    if len(fields) != N_FEATURES + 1:
        raise FieldCountMismatch(
            f"expected {N_FEATURES + 1} fields, got {len(fields)}: {line[:80]!r}"
        )
    label = strip_label(fields[-1].strip())
    if not label:
        raise FieldCountMismatch(f"empty label in record: {line[:80]!r}")
    features = fields[:-1]
    for j, kind in enumerate(schema):
        if kind == CONTINUOUS:
            try:
                float(features[j])
            except ValueError:
                raise MalformedNumeric(
                    f"column {j}: {features[j]!r} is not numeric"
                ) from None
    return RawRecord(features=tuple(features), label=label)


class _OwningTextWrapper(io.TextIOWrapper):
    """TextIOWrapper that also closes the raw file under a gzip stream."""

    def __init__(self, buffer, raw, **kwargs):
        super().__init__(buffer, **kwargs)
        self._raw_file = raw

    def close(self):
        try:
            super().close()
        finally:
            self._raw_file.close()


def open_maybe_gzip(path: str, mode: str = "rt"):
    """Open a text file, transparently (de)compressing when it ends in .gz.

    Writes use a fixed gzip timestamp and carry no stored filename, so the
    bytes of an output file depend only on its content and reruns reproduce
    it exactly.
    """
    if path.endswith(".gz"):
        if "w" in mode:
            raw = open(path, "wb")
            gz = gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0)
            return _OwningTextWrapper(gz, raw, encoding="ascii", newline="")
        return gzip.open(path, mode, encoding="ascii", newline="")
    return open(path, mode, encoding="ascii", newline="")


def iter_kdd_rows(path: str) -> Iterator[list[str]]:
    """Yield raw field lists from a KDD CSV file, checking field counts."""
    with open_maybe_gzip(path) as fh:
        for lineno, fields in enumerate(csv.reader(fh), 1):
            if not fields:
                continue
            if len(fields) != N_FEATURES + 1:
                raise FieldCountMismatch(
                    f"{path}:{lineno}: expected {N_FEATURES + 1} fields, "
                    f"got {len(fields)}"
                )
            yield fields


def read_kdd_file(path: str, schema: Sequence[str]) -> list[RawRecord]:
    """Read a whole KDD CSV file into records, validating numeric columns.

    Numeric validation is vectorized per column over the full file; the
    slow per-element scan runs only to locate an offending value.
    """
    rows = list(iter_kdd_rows(path))
    records = []
    intern = sys.intern
    for fields in rows:
        label = strip_label(fields[-1].strip())
        if not label:
            raise FieldCountMismatch(f"{path}: record with empty label")
        records.append(
            RawRecord(features=tuple(intern(f) for f in fields[:-1]), label=intern(label))
        )
    validate_numeric_columns(records, schema, path)
    return records


def validate_numeric_columns(
    records: Sequence[RawRecord], schema: Sequence[str], origin: str
) -> None:
    if not records:
        return
    for j, kind in enumerate(schema):
        if kind != CONTINUOUS:
            continue
        col = [r.features[j] for r in records]
        try:
            np.asarray(col, dtype=np.float64)
        except ValueError:
            for i, value in enumerate(col):
                try:
                    float(value)
                except ValueError:
                    raise MalformedNumeric(
                        f"{origin}: record {i}, column {j}: {value!r} is not numeric"
                    ) from None


def map_label(
    attack_name: str, category_map: dict[str, int], *, policy: str = "strict"
) -> ClassLabel | None:
    """Map an attack name to its category; "normal" always maps to Normal.

    policy="strict" raises UnknownAttackName for unmapped names,
    policy="drop" returns None so callers can skip the record.
    """
    if policy not in ("strict", "drop"):
        raise ValidationError(f"unknown label policy {policy!r}")
    category = category_map.get(attack_name)
    if category is None:
        if policy == "strict":
            raise UnknownAttackName(
                f"attack name {attack_name!r} is not in the category map"
            )
        return None
    return ClassLabel(category=category, attack_name=attack_name)


class Encoder:
    """Fixed-width numeric encoder fitted on a training set.

    Symbolic columns become one-hot blocks over first-seen vocabularies;
    unseen values at encode time produce an all-zero block. Continuous
    columns are z-scored with population standard deviation; zero-variance
    columns encode to constant 0.
    """

    def __init__(
        self,
        kinds: Sequence[str],
        vocabularies: dict[int, dict[str, int]],
        means: dict[int, float],
        sds: dict[int, float],
    ):
        self.kinds = list(kinds)
        self.vocabularies = vocabularies
        self.means = means
        self.sds = sds
        self._offsets: list[int] = []
        width = 0
        for j, kind in enumerate(self.kinds):
            self._offsets.append(width)
            width += len(vocabularies[j]) if kind == SYMBOLIC else 1
        self.output_dim = width

    def encode(self, record: RawRecord) -> np.ndarray:
        """Encode one record to a fixed-width float vector."""
        out = np.zeros(self.output_dim, dtype=np.float64)
        for j, kind in enumerate(self.kinds):
            off = self._offsets[j]
            if kind == CONTINUOUS:
                sd = self.sds[j]
                if sd > 0.0:
                    out[off] = (float(record.features[j]) - self.means[j]) / sd
            else:
                slot = self.vocabularies[j].get(record.features[j])
                if slot is not None:
                    out[off + slot] = 1.0
        return out

    def encode_many(self, records: Sequence[RawRecord]) -> np.ndarray:
        """Vectorized encoding of many records; rows match input order."""
        n = len(records)
        out = np.zeros((n, self.output_dim), dtype=np.float64)
        for j, kind in enumerate(self.kinds):
            off = self._offsets[j]
            col = [r.features[j] for r in records]
            if kind == CONTINUOUS:
                sd = self.sds[j]
                if sd > 0.0:
                    vals = np.asarray(col, dtype=np.float64)
                    out[:, off] = (vals - self.means[j]) / sd
            else:
                vocab = self.vocabularies[j]
                for i, value in enumerate(col):
                    slot = vocab.get(value)
                    if slot is not None:
                        out[i, off + slot] = 1.0
        return out

    def to_dict(self) -> dict:
        return {
            "kinds": self.kinds,
            "vocabularies": {
                str(j): list(v.keys()) for j, v in self.vocabularies.items()
            },
            "means": {str(j): m for j, m in self.means.items()},
            "sds": {str(j): s for j, s in self.sds.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Encoder":
        vocabularies = {
            int(j): {value: slot for slot, value in enumerate(values)}
            for j, values in doc["vocabularies"].items()
        }
        means = {int(j): float(m) for j, m in doc["means"].items()}
        sds = {int(j): float(s) for j, s in doc["sds"].items()}
        return cls(doc["kinds"], vocabularies, means, sds)


def fit_encoder(train: Sequence[RawRecord], schema: Sequence[str]) -> Encoder:
    """Fit vocabularies and continuous statistics on the training set only.

    Deterministic for a fixed input order: vocabularies keep first-seen
    order, statistics use population standard deviation.
    """
    if not train:
        raise EmptyDataset("cannot fit an encoder on an empty dataset")
    vocabularies: dict[int, dict[str, int]] = {}
    means: dict[int, float] = {}
    sds: dict[int, float] = {}
    for j, kind in enumerate(schema):
        col = [r.features[j] for r in train]
        if kind == SYMBOLIC:
            vocab: dict[str, int] = {}
            for value in col:
                if value not in vocab:
                    vocab[value] = len(vocab)
            vocabularies[j] = vocab
        else:
            vals = np.asarray(col, dtype=np.float64)
            vocabularies[j] = {}
            means[j] = float(vals.mean())
            sds[j] = float(vals.std())
    return Encoder(schema, vocabularies, means, sds)
