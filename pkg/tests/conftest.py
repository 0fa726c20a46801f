import os

# Pin BLAS pools before numpy loads anywhere: timing comparisons are
# defined single-threaded and it keeps re-execution byte-stable.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from fedeval.data import write_demo_digits_csv, load_optdigits
from fedeval.model import Dataset


@pytest.fixture(scope="session")
def digits_csv(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("data") / "digits.csv"
    write_demo_digits_csv(str(path))
    return str(path)


@pytest.fixture(scope="session")
def digits_data(digits_csv) -> Dataset:
    return load_optdigits(digits_csv)


def make_blobs(seed: int, n: int, num_classes: int = 3, num_features: int = 8) -> Dataset:
    """Small separable synthetic classification set."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, num_classes, n)
    centers = rng.normal(0.0, 1.0, (num_classes, num_features))
    feats = centers[labels] + rng.normal(0.0, 0.5, (n, num_features))
    return Dataset(feats, labels, num_classes=num_classes)


@pytest.fixture
def blob_factory():
    return make_blobs
