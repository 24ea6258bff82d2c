"""Turn a scenario plus a sample store into a single-pass mini-batch stream.

Every sample is emitted exactly once across the whole run; each task's
batches contain only that task's classes, at exactly the scheduled counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import SampleStore
from .errors import DataError
from .scenario import Scenario


@dataclass(eq=False)
class LabeledVector:
    """One sample: feature vector, class label, stable id."""

    sample_id: int
    features: np.ndarray
    label: int


@dataclass
class TaskStream:
    task_index: int
    batches: list[list[LabeledVector]]
    batch_size: int

    @property
    def num_samples(self) -> int:
        return sum(len(b) for b in self.batches)

    def samples(self) -> list[LabeledVector]:
        return [sample for batch in self.batches for sample in batch]


def materialize_stream(
    scenario: Scenario,
    store: SampleStore,
    batch_size: int,
    rng: np.random.Generator,
) -> list[TaskStream]:
    """Draw every task's samples without replacement and chunk into batches.

    Per class, a seeded draw order is fixed once and consumed across tasks,
    so no sample repeats anywhere in the run. Within a task the combined
    samples are shuffled; the last batch may be short.
    """
    if batch_size < 1:
        raise DataError("batch_size must be >= 1")

    needed: dict[int, int] = {}
    for task in scenario.tasks:
        for cid, count in task.sample_counts.items():
            needed[cid] = needed.get(cid, 0) + count
    for cid, total in sorted(needed.items()):
        if cid not in store.features:
            raise DataError(f"class {cid} scheduled but absent from the dataset")
        have = store.count(cid)
        if have < total:
            raise DataError(
                f"class {cid}: dataset holds {have} samples, schedule needs {total} "
                f"(short by {total - have})"
            )

    draw_order = {cid: rng.permutation(store.count(cid)) for cid in sorted(needed)}
    cursors = {cid: 0 for cid in draw_order}

    streams: list[TaskStream] = []
    for task in scenario.tasks:
        samples: list[LabeledVector] = []
        for cid in sorted(task.sample_counts):
            count = task.sample_counts[cid]
            start = cursors[cid]
            rows = draw_order[cid][start:start + count]
            cursors[cid] = start + count
            feats = store.features[cid]
            ids = store.sample_ids[cid]
            samples.extend(
                LabeledVector(int(ids[r]), feats[r], cid) for r in rows
            )
        order = rng.permutation(len(samples))
        shuffled = [samples[i] for i in order]
        batches = [shuffled[i:i + batch_size] for i in range(0, len(shuffled), batch_size)]
        streams.append(TaskStream(task.index, batches, batch_size))
    return streams
