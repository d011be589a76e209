"""Shared fixtures: synthetic KDD-style data and toy numeric sets.

The synthetic generator emits schema-compatible 42-field records with real
attack names, so the packaged category map and cluster table apply. Each
label gets a distinctive symbolic signature plus a Gaussian bump on two
informative continuous columns, which makes the files learnable at small
sizes without resembling any real traffic.
"""

from __future__ import annotations

import numpy as np
import pytest

from bspnn.ingest import N_FEATURES, open_maybe_gzip

# (protocol, service, flag, x, y) per label; x/y land in src_bytes/dst_bytes
LABEL_PROFILES = {
    "normal": ("tcp", "http", "SF", 0.0, 0.0),
    "back": ("tcp", "http", "SF", 9.0, 0.0),
    "smurf": ("icmp", "ecr_i", "SF", 0.0, 9.0),
    "neptune": ("tcp", "private", "S0", 9.0, 9.0),
    "land": ("tcp", "private", "S0", 11.0, 9.0),
    "satan": ("tcp", "private", "REJ", -9.0, 0.0),
    "portsweep": ("tcp", "private", "REJ", -9.0, 2.5),
    "ipsweep": ("icmp", "eco_i", "SF", -9.0, 9.0),
    "nmap": ("icmp", "eco_i", "SF", -11.0, 9.0),
    "guess_passwd": ("tcp", "ftp", "SF", 0.0, -9.0),
    "warezclient": ("tcp", "ftp_data", "SF", 2.5, -9.0),
    "buffer_overflow": ("tcp", "telnet", "SF", -9.0, -9.0),
    "rootkit": ("tcp", "telnet", "SF", -6.5, -9.0),
}

_SYMBOLIC_COLS = {1: 0, 2: 1, 3: 2}  # schema column -> profile slot
_X_COL, _Y_COL = 4, 5  # src_bytes / dst_bytes carry the informative signal
_NOISE_COLS = (7, 22, 23, 30)  # mild uninformative jitter
# every other continuous column is constant zero, like the bulk of the real
# files; per-column standardization would otherwise blow pure noise up to
# unit variance and drown the class signal


def synthetic_records(spec: dict[str, int], seed: int = 0) -> list[str]:
    """Generate '41 fields + label.' CSV lines for the given label counts."""
    rng = np.random.default_rng(seed)
    lines = []
    for label, count in spec.items():
        protocol, service, flag, x, y = LABEL_PROFILES[label]
        for _ in range(count):
            fields = []
            for col in range(N_FEATURES):
                if col in _SYMBOLIC_COLS:
                    fields.append((protocol, service, flag)[_SYMBOLIC_COLS[col]])
                elif col == _X_COL:
                    fields.append(f"{rng.normal(x, 1.0):.4f}")
                elif col == _Y_COL:
                    fields.append(f"{rng.normal(y, 1.0):.4f}")
                elif col in _NOISE_COLS:
                    fields.append(f"{rng.normal(0.0, 0.3):.4f}")
                else:
                    fields.append("0")
            lines.append(",".join(fields) + f",{label}.")
    order = rng.permutation(len(lines))
    return [lines[i] for i in order]


def write_synthetic_kdd(path: str, spec: dict[str, int], seed: int = 0) -> str:
    with open_maybe_gzip(str(path), "wt") as fh:
        for line in synthetic_records(spec, seed):
            fh.write(line + "\n")
    return str(path)


TRAIN_SPEC = {
    "normal": 400,
    "back": 60,
    "smurf": 80,
    "neptune": 60,
    "satan": 40,
    "portsweep": 30,
    "ipsweep": 40,
    "guess_passwd": 30,
    "warezclient": 25,
    "buffer_overflow": 20,
    "rootkit": 15,
}

TEST_SPEC = {
    "normal": 200,
    "back": 30,
    "smurf": 40,
    "neptune": 30,
    "satan": 20,
    "ipsweep": 20,
    "guess_passwd": 15,
    "buffer_overflow": 10,
}


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """Session-scoped synthetic train/test files."""
    root = tmp_path_factory.mktemp("synth")
    train = write_synthetic_kdd(root / "train.csv", TRAIN_SPEC, seed=101)
    test = write_synthetic_kdd(root / "test.csv.gz", TEST_SPEC, seed=202)
    return {"root": str(root), "train": train, "test": test}


def make_blobs(
    n_per_class: int, centers: np.ndarray, sigma: float = 1.0, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian blobs, one per row of centers."""
    rng = np.random.default_rng(seed)
    X = np.concatenate(
        [rng.normal(c, sigma, size=(n_per_class, len(c))) for c in centers]
    )
    y = np.repeat(np.arange(len(centers)), n_per_class)
    order = rng.permutation(len(X))
    return X[order], y[order]
