from __future__ import annotations

import numpy as np
import pytest

from ocilab.learner import init_classifier
from ocilab.stream import LabeledVector


def make_batch(features: np.ndarray, labels: list[int], first_id: int = 0) -> list[LabeledVector]:
    return [
        LabeledVector(first_id + i, np.asarray(row, dtype=np.float64), int(label))
        for i, (row, label) in enumerate(zip(features, labels))
    ]


def random_batch(rng: np.random.Generator, n: int, dim: int, num_classes: int, first_id: int = 0):
    feats = rng.normal(size=(n, dim))
    labels = rng.integers(0, num_classes, size=n).tolist()
    return make_batch(feats, labels, first_id=first_id)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_linear_state():
    return init_classifier(4, 3, hidden_dim=None, rng=np.random.default_rng(7))


@pytest.fixture
def small_hidden_state():
    return init_classifier(4, 3, hidden_dim=5, rng=np.random.default_rng(7))
