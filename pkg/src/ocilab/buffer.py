"""Capacity-bounded exemplar memory with pluggable strategies.

Update strategies: reservoir sampling (uniform over the whole stream) and
greedy gradient-similarity selection. Retrieval strategies: uniform random
and interference-based (score buffered items by how much a virtual update
on the incoming batch raises their loss, keep the top-k).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .learner import (
    ClassifierState,
    SgdConfig,
    loss_and_grads,
    loss_per_sample,
    per_sample_grad_vectors,
    sgd_step,
)
from .stream import LabeledVector


def reservoir_index(num_seen: int, capacity: int, rng: np.random.Generator) -> int:
    """Slot for the (num_seen+1)-th stream item, or -1 to discard.

    Below capacity the item appends; afterwards it enters with probability
    capacity / (num_seen + 1), evicting a uniformly chosen victim.
    """
    if num_seen < capacity:
        return num_seen
    slot = int(rng.integers(0, num_seen + 1))
    return slot if slot < capacity else -1


@dataclass
class StoredItem:
    sample_id: int
    vector: LabeledVector
    score: float = 0.0  # strategy metadata (gradient-similarity score)


@dataclass
class ExemplarBuffer:
    capacity: int
    items: list[StoredItem] = field(default_factory=list)
    seen_count: int = 0

    def __post_init__(self) -> None:
        self._ids = {item.sample_id for item in self.items}

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, sample_id: int) -> bool:
        return sample_id in self._ids

    def _insert(self, slot: int, item: StoredItem) -> None:
        if slot == len(self.items):
            self.items.append(item)
        else:
            self._ids.discard(self.items[slot].sample_id)
            self.items[slot] = item
        self._ids.add(item.sample_id)

    def vectors(self) -> list[LabeledVector]:
        return [item.vector for item in self.items]


def update_random(buffer: ExemplarBuffer, batch: list[LabeledVector], rng: np.random.Generator) -> ExemplarBuffer:
    """Reservoir-sample the batch into the buffer; duplicates are rejected."""
    for sample in batch:
        if sample.sample_id in buffer:
            continue
        slot = reservoir_index(buffer.seen_count, buffer.capacity, rng)
        buffer.seen_count += 1
        if slot >= 0:
            buffer._insert(slot, StoredItem(sample.sample_id, sample))
    return buffer


def retrieve_random(buffer: ExemplarBuffer, k: int, rng: np.random.Generator) -> list[LabeledVector]:
    """min(k, len) uniform draws without replacement; empty buffer -> []."""
    n = len(buffer)
    if n == 0 or k <= 0:
        return []
    picks = rng.choice(n, size=min(k, n), replace=False)
    return [buffer.items[i].vector for i in picks]


def retrieve_interfered(
    buffer: ExemplarBuffer,
    k: int,
    incoming: list[LabeledVector],
    state: ClassifierState,
    sgd_cfg: SgdConfig,
    rng: np.random.Generator,
    candidate_size: int = 50,
) -> list[LabeledVector]:
    """Return the k buffered samples whose loss rises most under a virtual
    update on the incoming batch.

    A candidate pool of ``candidate_size`` items is drawn uniformly without
    replacement (the whole buffer when candidate_size >= len). Each
    candidate is scored loss(after virtual step) - loss(before); ties break
    toward the lower sample id. The given state is never mutated. An empty
    incoming batch carries no interference signal and degrades to uniform
    retrieval.
    """
    n = len(buffer)
    if n == 0 or k <= 0:
        return []
    if not incoming:
        return retrieve_random(buffer, k, rng)
    if candidate_size < k:
        candidate_size = k
    if candidate_size >= n:
        candidate_idx = np.arange(n)
    else:
        candidate_idx = rng.choice(n, size=candidate_size, replace=False)
    candidates = [buffer.items[i] for i in candidate_idx]
    cand_vectors = [c.vector for c in candidates]

    virtual = state.copy(frozen=False)
    _, grads = loss_and_grads(virtual, incoming)
    sgd_step(virtual, grads, sgd_cfg)

    before = loss_per_sample(state, cand_vectors)
    after = loss_per_sample(virtual, cand_vectors)
    scores = after - before

    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], candidates[i].sample_id))
    top = order[: min(k, len(candidates))]
    return [candidates[i].vector for i in top]


def _cosine_rows(g: np.ndarray, others: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(others, axis=1) * np.linalg.norm(g)
    dots = others @ g
    out = np.zeros(len(others))
    nz = norms > 0
    out[nz] = dots[nz] / norms[nz]
    return out


def update_gradient_similarity(
    buffer: ExemplarBuffer,
    batch: list[LabeledVector],
    state: ClassifierState,
    rng: np.random.Generator,
    candidate_size: int = 10,
) -> ExemplarBuffer:
    """Greedy diversity-seeking update keyed on loss-gradient directions.

    Each incoming sample is scored by the maximum cosine similarity between
    its single-sample gradient and the gradients of up to ``candidate_size``
    randomly drawn buffer members (0 against an empty buffer). Below
    capacity the sample is stored with that score. At capacity it replaces
    the drawn member holding the highest stored score, but only if the
    incoming score is lower (i.e. the incoming gradient is more diverse);
    otherwise it is discarded.
    """
    if not batch:
        return buffer
    incoming_grads = per_sample_grad_vectors(state, batch)
    for sample, grad in zip(batch, incoming_grads):
        if sample.sample_id in buffer:
            continue
        buffer.seen_count += 1
        n = len(buffer)
        if n == 0:
            buffer._insert(0, StoredItem(sample.sample_id, sample, score=0.0))
            continue
        draw = min(candidate_size, n)
        member_idx = rng.choice(n, size=draw, replace=False)
        member_vectors = [buffer.items[i].vector for i in member_idx]
        member_grads = per_sample_grad_vectors(state, member_vectors)
        score = float(_cosine_rows(grad, member_grads).max())
        if n < buffer.capacity:
            buffer._insert(n, StoredItem(sample.sample_id, sample, score=score))
            continue
        stored_scores = np.array([buffer.items[i].score for i in member_idx])
        worst = int(stored_scores.argmax())
        if score < stored_scores[worst]:
            buffer._insert(int(member_idx[worst]), StoredItem(sample.sample_id, sample, score=score))
    return buffer


def class_means(buffer: ExemplarBuffer) -> dict[int, np.ndarray]:
    """Arithmetic mean of stored feature vectors per class present."""
    sums: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    for item in buffer.items:
        label = item.vector.label
        if label in sums:
            sums[label] = sums[label] + item.vector.features
            counts[label] += 1
        else:
            sums[label] = item.vector.features.astype(np.float64, copy=True)
            counts[label] = 1
    return {label: sums[label] / counts[label] for label in sums}


def buffer_to_dict(buffer: ExemplarBuffer) -> dict:
    return {
        "capacity": buffer.capacity,
        "seen_count": buffer.seen_count,
        "items": [
            {
                "sample_id": item.sample_id,
                "label": item.vector.label,
                "features": item.vector.features.tolist(),
                "score": item.score,
            }
            for item in buffer.items
        ],
    }


def buffer_from_dict(payload: dict) -> ExemplarBuffer:
    items = [
        StoredItem(
            sample_id=int(entry["sample_id"]),
            vector=LabeledVector(
                int(entry["sample_id"]),
                np.array(entry["features"], dtype=np.float64),
                int(entry["label"]),
            ),
            score=float(entry["score"]),
        )
        for entry in payload["items"]
    ]
    return ExemplarBuffer(
        capacity=int(payload["capacity"]),
        items=items,
        seen_count=int(payload["seen_count"]),
    )
