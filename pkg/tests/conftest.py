import os
from pathlib import Path

import numpy as np
import pytest

from featsr.data import PairDataset

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def toy_dir():
    return DATA_DIR / "toy"


@pytest.fixture
def labeled_dir():
    return DATA_DIR / "toy_labeled"


def synthetic_dataset(n_pairs=8, hr_size=32, seed=0, labels=None, class_names=None):
    """In-memory dataset with smooth random pairs; LR is a strided view of
    HR, which is wrong as signal processing but fine for wiring tests."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        hr = np.tanh(rng.normal(0, 0.5, (3, hr_size, hr_size))).astype(np.float32)
        lr = hr[:, ::4, ::4].copy()
        pairs.append((lr, hr))
    manifest = []
    return PairDataset(pairs, manifest, "train", labels=labels, class_names=class_names)


@pytest.fixture
def tiny_dataset():
    return synthetic_dataset(n_pairs=8, hr_size=32)
