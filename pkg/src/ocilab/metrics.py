"""Accuracy-matrix bookkeeping over held-out per-task test sets.

Row i of the matrix holds the model's accuracy on every task's test set
right after training on task i finished; the headline number is the mean
of the final row.
"""

from __future__ import annotations

import numpy as np

from .dataset import SampleStore
from .errors import DataError
from .learner import ClassifierState, ncm_predict, predict
from .scenario import Scenario
from .stream import LabeledVector


class AccuracyMatrix:
    """T x T matrix, row-filled as tasks complete; unfilled entries are NaN."""

    def __init__(self, num_tasks: int):
        if num_tasks < 1:
            raise DataError("accuracy matrix needs at least one task")
        self.num_tasks = num_tasks
        self.values = np.full((num_tasks, num_tasks), np.nan)

    def set_row(self, task_index: int, row: np.ndarray) -> None:
        row = np.asarray(row, dtype=float)
        if row.shape != (self.num_tasks,):
            raise DataError(f"row shape {row.shape} != ({self.num_tasks},)")
        if np.any((row < 0) | (row > 1)):
            raise DataError("accuracies must lie in [0, 1]")
        self.values[task_index] = row

    @property
    def final_row(self) -> np.ndarray:
        return self.values[-1]

    def is_complete(self) -> bool:
        return not np.isnan(self.values).any()

    def to_lists(self) -> list[list[float]]:
        return [[float(v) for v in row] for row in self.values]


def build_test_sets(scenario: Scenario, test_store: SampleStore) -> list[list[LabeledVector]]:
    """Per-task test splits: every held-out sample of every class in the task.

    The test store is balanced per class, so each task's split is balanced
    over the classes present in it.
    """
    test_sets: list[list[LabeledVector]] = []
    for task in scenario.tasks:
        samples: list[LabeledVector] = []
        for cid in task.classes:
            if cid not in test_store.features:
                raise DataError(f"task {task.index}: class {cid} has no held-out test samples")
            feats = test_store.features[cid]
            ids = test_store.sample_ids[cid]
            samples.extend(
                LabeledVector(int(ids[r]), feats[r], cid) for r in range(feats.shape[0])
            )
        if not samples:
            raise DataError(f"task {task.index}: empty test set")
        test_sets.append(samples)
    return test_sets


def evaluate_row(
    state: ClassifierState,
    test_sets: list[list[LabeledVector]],
    class_means: dict[int, np.ndarray] | None = None,
) -> np.ndarray:
    """Accuracy on every task's test set; nearest-class-mean when means given."""
    accs = np.zeros(len(test_sets))
    for j, samples in enumerate(test_sets):
        if not samples:
            raise DataError(f"test set {j} is empty")
        if class_means is not None:
            preds = ncm_predict(class_means, samples)
        else:
            preds = predict(state, samples)
        labels = np.array([s.label for s in samples])
        accs[j] = float((preds == labels).mean())
    return accs


def average_accuracy(matrix: AccuracyMatrix) -> float:
    """Mean of the final row; requires the matrix to be fully filled."""
    if np.isnan(matrix.final_row).any():
        raise DataError("final row incomplete; finish all tasks before averaging")
    return float(matrix.final_row.mean())
