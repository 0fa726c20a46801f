"""Dataset ingestion, owner splitting, and per-owner noise injection.

The expected file format is the classic handwritten-digits CSV: each line
holds 64 integer pixel features in [0, 16] followed by a class label in
[0, 9]. Features are scaled by 1/16 into [0, 1] at load time.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .model import Dataset
from .rng import SplitMix64, derive_u64, fisher_yates

NUM_FEATURES = 64
NUM_CLASSES = 10
FEATURE_MAX = 16


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    num_owners: int = 9
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.num_owners < 1:
            raise ValueError("num_owners must be positive")


@dataclass(frozen=True)
class NoiseConfig:
    sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


def load_optdigits(path: str) -> Dataset:
    """Load a digits CSV: 65 comma-separated integers per line.

    Malformed or out-of-range lines raise with their 1-based line number.
    """
    features: list[list[int]] = []
    labels: list[int] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != NUM_FEATURES + 1:
                raise ValueError(
                    f"line {lineno}: expected {NUM_FEATURES + 1} fields, got {len(parts)}"
                )
            try:
                values = [int(p) for p in parts]
            except ValueError as exc:
                raise ValueError(f"line {lineno}: non-integer field ({exc})") from None
            pixels, label = values[:-1], values[-1]
            if any(not 0 <= v <= FEATURE_MAX for v in pixels):
                raise ValueError(f"line {lineno}: feature outside [0, {FEATURE_MAX}]")
            if not 0 <= label < NUM_CLASSES:
                raise ValueError(f"line {lineno}: label outside [0, {NUM_CLASSES})")
            features.append(pixels)
            labels.append(label)
    if not features:
        raise ValueError(f"{path}: no instances found")
    scaled = np.asarray(features, dtype=np.float64) / FEATURE_MAX
    return Dataset(scaled, np.asarray(labels, dtype=np.int64), num_classes=NUM_CLASSES)


def split_owners(data: Dataset, cfg: SplitConfig) -> tuple[list[Dataset], Dataset]:
    """Seeded shuffle, head fraction round-robined into owner subsets, tail as test."""
    n = len(data)
    train_size = int(n * cfg.train_fraction)
    if cfg.num_owners > train_size:
        raise ValueError(
            f"cannot split {train_size} training instances among {cfg.num_owners} owners"
        )
    order = fisher_yates(range(n), SplitMix64(derive_u64(b"owner-split", cfg.rng_seed)))
    train_idx = order[:train_size]
    test_idx = order[train_size:]
    owners = []
    for k in range(cfg.num_owners):
        idx = train_idx[k :: cfg.num_owners]
        owners.append(
            Dataset(data.features[idx], data.labels[idx], num_classes=data.num_classes)
        )
    test = Dataset(data.features[test_idx], data.labels[test_idx], num_classes=data.num_classes)
    return owners, test


def add_noise(owner_data: Dataset, owner_index: int, cfg: NoiseConfig) -> Dataset:
    """Add zero-mean Gaussian feature noise with standard deviation sigma * index.

    Owner 0 (or sigma 0) comes back bit-identical; labels are never touched.
    """
    if owner_index < 0:
        raise ValueError("owner index must be non-negative")
    std = cfg.sigma * owner_index
    if std == 0.0:
        return Dataset(
            owner_data.features.copy(), owner_data.labels.copy(), owner_data.num_classes
        )
    rng = np.random.default_rng(derive_u64(b"feature-noise", cfg.rng_seed, owner_index))
    noisy = owner_data.features + rng.normal(0.0, std, owner_data.features.shape)
    return Dataset(noisy, owner_data.labels.copy(), owner_data.num_classes)


def truncate(data: Dataset, max_instances: int) -> Dataset:
    """Keep only the first max_instances rows (row order preserved)."""
    if max_instances < 1:
        raise ValueError("max_instances must be positive")
    if max_instances >= len(data):
        return data
    return Dataset(
        data.features[:max_instances], data.labels[:max_instances], data.num_classes
    )


def write_demo_digits_csv(path: str) -> str:
    """Materialize the bundled 8x8 digits data as a CSV in the expected format.

    Used when no real data file is supplied; the bundled set has the same
    schema (64 integer pixels in [0, 16], labels 0-9) at desk scale.
    """
    from sklearn.datasets import load_digits

    digits = load_digits()
    pixels = digits.data.astype(np.int64)
    labels = digits.target.astype(np.int64)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="ascii") as fh:
        for row, label in zip(pixels, labels):
            fh.write(",".join(str(v) for v in row) + f",{label}\n")
    return path


def ensure_dataset(path: str | None, out_dir: str) -> str:
    """Resolve a dataset path, materializing the demo CSV when none is given."""
    if path:
        return path
    demo = os.path.join(out_dir, "digits.csv")
    if not os.path.exists(demo):
        write_demo_digits_csv(demo)
    return demo
