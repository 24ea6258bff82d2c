"""Dual-virtual-model gate deciding what each training step consumes.

From the second task onward, every incoming batch is evaluated through two
frozen clones of the current model: one sees the full batch plus its
retrieved exemplars, the other only the batch's never-seen-before labels
plus exemplars retrieved for that subset. Whichever clone beats the
threshold accuracy (recorded once, after the first task) wins, and its
data is what the real update trains on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .buffer import ExemplarBuffer
from .errors import GateError
from .learner import ClassifierState, clone_frozen, predict
from .stream import LabeledVector

FULL_BRANCH = 1
NOVEL_BRANCH = 2

BRANCH_LOG_HEADER = ["step", "task", "acc_vm1", "acc_vm2", "TH", "chosen"]


@dataclass
class PriorDistribution:
    """Set of class labels observed in training so far; never shrinks."""

    seen_labels: set[int] = field(default_factory=set)

    def observe(self, labels: set[int]) -> None:
        self.seen_labels |= labels


@dataclass
class BranchRecord:
    step: int
    task: int
    acc_full: float
    acc_novel: float
    threshold: float
    chosen: int


@dataclass
class GateState:
    threshold: float | None = None
    prior: PriorDistribution = field(default_factory=PriorDistribution)
    branch_log: list[BranchRecord] = field(default_factory=list)

    @property
    def active(self) -> bool:
        return self.threshold is not None


def split_batch(
    batch: list[LabeledVector], prior: PriorDistribution
) -> tuple[list[LabeledVector], list[LabeledVector]]:
    """Partition into (repeated, novel) by prior label membership, order kept."""
    repeated = [s for s in batch if s.label in prior.seen_labels]
    novel = [s for s in batch if s.label not in prior.seen_labels]
    return repeated, novel


def eval_branch(
    frozen_vm: ClassifierState,
    data: list[LabeledVector],
    exemplars: list[LabeledVector],
) -> float:
    """Fraction of correct predictions over data ++ exemplars; empty -> 0.0."""
    combined = list(data) + list(exemplars)
    if not combined:
        return 0.0
    preds = predict(frozen_vm, combined)
    labels = [s.label for s in combined]
    return float(sum(int(p == y) for p, y in zip(preds, labels)) / len(combined))


def set_threshold(gate: GateState, first_task_accuracy: float) -> GateState:
    """Record the post-first-task accuracy as the gate threshold, once."""
    if gate.threshold is not None:
        raise GateError("threshold is already set and is immutable")
    if not 0.0 <= first_task_accuracy <= 1.0:
        raise GateError(f"threshold accuracy {first_task_accuracy} outside [0, 1]")
    gate.threshold = float(first_task_accuracy)
    return gate


def observe_labels(gate: GateState, batch: list[LabeledVector]) -> GateState:
    """Fold the batch's labels into the prior (call after gating the batch)."""
    gate.prior.observe({s.label for s in batch})
    return gate


def gate_batch(
    batch: list[LabeledVector],
    buffer: ExemplarBuffer,
    state: ClassifierState,
    gate: GateState,
    retrieve,
    step: int,
    task: int,
) -> tuple[list[LabeledVector], list[LabeledVector], int]:
    """Pick the training payload for one batch.

    ``retrieve(reference_batch, k)`` must return exemplars for a branch,
    conditioned on that branch's data. Returns (data, exemplars, branch).
    Selection rule: a branch is eligible if its clone's accuracy strictly
    exceeds the threshold; the higher eligible accuracy wins, a full tie
    prefers the novel branch, and with no eligible branch the full batch is
    the conservative default.
    """
    if gate.threshold is None:
        raise GateError("gate used before the threshold was set (first task must finish)")

    exemplars_full = retrieve(batch, len(batch))
    vm_full = clone_frozen(state)
    acc_full = eval_branch(vm_full, batch, exemplars_full)

    _, novel = split_batch(batch, gate.prior)
    if novel:
        exemplars_novel = retrieve(novel, len(novel))
        vm_novel = clone_frozen(state)
        acc_novel = eval_branch(vm_novel, novel, exemplars_novel)
    else:
        exemplars_novel = []
        acc_novel = 0.0

    th = gate.threshold
    full_ok = acc_full > th
    novel_ok = bool(novel) and acc_novel > th
    if full_ok and novel_ok:
        chosen = NOVEL_BRANCH if acc_novel >= acc_full else FULL_BRANCH
    elif novel_ok:
        chosen = NOVEL_BRANCH
    else:
        chosen = FULL_BRANCH

    gate.branch_log.append(BranchRecord(step, task, acc_full, acc_novel, th, chosen))
    if chosen == NOVEL_BRANCH:
        return novel, exemplars_novel, NOVEL_BRANCH
    return list(batch), exemplars_full, FULL_BRANCH


def write_branch_log(records: list[BranchRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BRANCH_LOG_HEADER)
        for r in records:
            writer.writerow([r.step, r.task, repr(r.acc_full), repr(r.acc_novel), repr(r.threshold), r.chosen])


def branch_log_to_dicts(records: list[BranchRecord]) -> list[dict]:
    return [
        {
            "step": r.step,
            "task": r.task,
            "acc_vm1": r.acc_full,
            "acc_vm2": r.acc_novel,
            "TH": r.threshold,
            "chosen": r.chosen,
        }
        for r in records
    ]
