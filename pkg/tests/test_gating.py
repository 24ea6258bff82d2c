from __future__ import annotations

import csv

import numpy as np
import pytest

from ocilab.buffer import ExemplarBuffer, retrieve_interfered, update_random
from ocilab.errors import GateError
from ocilab.gating import (
    FULL_BRANCH,
    NOVEL_BRANCH,
    GateState,
    PriorDistribution,
    eval_branch,
    gate_batch,
    observe_labels,
    set_threshold,
    split_batch,
    write_branch_log,
)
from ocilab.learner import SgdConfig, init_classifier
from ocilab.stream import LabeledVector

from conftest import make_batch, random_batch


def biased_model(favored: int, num_classes: int = 3, dim: int = 2):
    """Zero-weight linear model that predicts one class for every input."""
    state = init_classifier(dim, num_classes, None, rng=np.random.default_rng(0))
    state.weights[0][:] = 0.0
    state.biases[0][:] = 0.0
    state.biases[0][favored] = 1.0
    return state


def labeled(labels: list[int], dim: int = 2, first_id: int = 0):
    return make_batch(np.ones((len(labels), dim)), labels, first_id=first_id)


def no_exemplars(reference, k):
    return []


# --- split ---


def test_split_by_prior_membership():
    batch = labeled([3, 7, 7, 9])
    repeated, novel = split_batch(batch, PriorDistribution({3, 7}))
    assert [s.label for s in repeated] == [3, 7, 7]
    assert [s.label for s in novel] == [9]


def test_split_empty_prior_everything_novel():
    batch = labeled([1, 2, 3])
    repeated, novel = split_batch(batch, PriorDistribution(set()))
    assert repeated == []
    assert [s.label for s in novel] == [1, 2, 3]


def test_split_full_prior_nothing_novel():
    batch = labeled([1, 2])
    repeated, novel = split_batch(batch, PriorDistribution({0, 1, 2, 3}))
    assert novel == []
    assert [s.label for s in repeated] == [1, 2]


def test_split_completeness_property():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(rng.integers(1, 20))
        batch = random_batch(rng, n, 2, 6)
        prior = PriorDistribution(set(rng.integers(0, 6, size=3).tolist()))
        repeated, novel = split_batch(batch, prior)
        ids = sorted(s.sample_id for s in repeated + novel)
        assert ids == sorted(s.sample_id for s in batch)
        assert all(s.label in prior.seen_labels for s in repeated)
        assert all(s.label not in prior.seen_labels for s in novel)


# --- branch evaluation ---


def test_eval_branch_perfect_model():
    state = biased_model(favored=2)
    assert eval_branch(state, labeled([2, 2, 2]), []) == 1.0


def test_eval_branch_all_wrong():
    state = biased_model(favored=0)
    assert eval_branch(state, labeled([1, 2, 1]), []) == 0.0


def test_eval_branch_empty_set_is_zero():
    state = biased_model(favored=0)
    assert eval_branch(state, [], []) == 0.0


def test_eval_branch_counts_exemplars():
    state = biased_model(favored=1)
    data = labeled([1, 0])
    exemplars = labeled([1, 1], first_id=10)
    assert eval_branch(state, data, exemplars) == pytest.approx(0.75)


# --- threshold protocol ---


def test_threshold_set_once():
    gate = GateState()
    set_threshold(gate, 0.73)
    assert gate.threshold == 0.73
    with pytest.raises(GateError):
        set_threshold(gate, 0.5)


def test_threshold_range_checked():
    with pytest.raises(GateError):
        set_threshold(GateState(), 1.2)
    with pytest.raises(GateError):
        set_threshold(GateState(), -0.1)


def test_observe_labels_accumulates():
    gate = GateState()
    observe_labels(gate, labeled([1, 2]))
    observe_labels(gate, labeled([2, 3]))
    assert gate.prior.seen_labels == {1, 2, 3}


def test_gate_before_threshold_rejected():
    with pytest.raises(GateError):
        gate_batch(labeled([0]), ExemplarBuffer(4), biased_model(0), GateState(),
                   no_exemplars, step=0, task=1)


# --- branch selection ---


def test_only_full_branch_eligible():
    state = biased_model(favored=0)
    gate = GateState()
    set_threshold(gate, 0.6)
    gate.prior.observe({0})
    batch = labeled([0] * 8 + [1, 2])  # full acc 0.8; novel = [1, 2], acc 0.0
    data, exemplars, chosen = gate_batch(batch, ExemplarBuffer(4), state, gate,
                                         no_exemplars, step=0, task=1)
    assert chosen == FULL_BRANCH
    assert len(data) == 10
    record = gate.branch_log[-1]
    assert record.acc_full == pytest.approx(0.8)
    assert record.acc_novel == 0.0


def test_higher_eligible_branch_wins():
    state = biased_model(favored=1)
    gate = GateState()
    set_threshold(gate, 0.6)
    gate.prior.observe({0})
    # full: 7 of 10 correct (0.7); novel = seven 1s -> 1.0; both exceed 0.6
    batch = labeled([1] * 7 + [0] * 3)
    data, _, chosen = gate_batch(batch, ExemplarBuffer(4), state, gate,
                                 no_exemplars, step=0, task=1)
    assert chosen == NOVEL_BRANCH
    assert [s.label for s in data] == [1] * 7


def test_neither_eligible_defaults_to_full():
    state = biased_model(favored=0)
    gate = GateState()
    set_threshold(gate, 0.99)
    gate.prior.observe({0})
    batch = labeled([0] * 5 + [1] * 5)  # full acc 0.5, novel acc 0.0
    _, _, chosen = gate_batch(batch, ExemplarBuffer(4), state, gate,
                              no_exemplars, step=0, task=1)
    assert chosen == FULL_BRANCH


def test_exact_tie_prefers_novel():
    state = biased_model(favored=1)
    gate = GateState()
    set_threshold(gate, 0.4)
    gate.prior.observe({1})
    # batch all label 2 except correct 1s; novel = 2s only
    # full: [1,1,2,2] -> acc 0.5 ; novel = [2,2] -> acc 0.0 : not a tie.
    # craft tie: all labels novel => full == novel exactly
    gate2 = GateState()
    set_threshold(gate2, 0.4)
    batch = labeled([1, 1, 2, 2])  # prior empty: everything novel
    _, _, chosen = gate_batch(batch, ExemplarBuffer(4), state, gate2,
                              no_exemplars, step=0, task=1)
    assert chosen == NOVEL_BRANCH


def test_empty_novel_split_forces_full():
    state = biased_model(favored=0)
    gate = GateState()
    set_threshold(gate, 0.1)
    gate.prior.observe({0, 1, 2})
    batch = labeled([0, 1, 2])
    _, _, chosen = gate_batch(batch, ExemplarBuffer(4), state, gate,
                              no_exemplars, step=3, task=2)
    assert chosen == FULL_BRANCH
    assert gate.branch_log[-1].acc_novel == 0.0


def test_gate_leaves_state_bitwise_unchanged():
    rng = np.random.default_rng(1)
    state = init_classifier(3, 4, 5, rng=rng)
    before_w = [w.copy() for w in state.weights]
    before_b = [b.copy() for b in state.biases]
    buffer = ExemplarBuffer(16)
    update_random(buffer, random_batch(rng, 16, 3, 4), rng)
    gate = GateState()
    set_threshold(gate, 0.5)
    gate.prior.observe({0, 1})
    cfg = SgdConfig(learning_rate=0.7)

    def retrieve(reference, k):
        return retrieve_interfered(buffer, k, reference, state, cfg, rng)

    gate_batch(random_batch(rng, 8, 3, 4, first_id=100), buffer, state, gate,
               retrieve, step=0, task=1)
    assert all(np.array_equal(a, b) for a, b in zip(state.weights, before_w))
    assert all(np.array_equal(a, b) for a, b in zip(state.biases, before_b))


def test_gate_decision_deterministic():
    def run_once():
        rng = np.random.default_rng(5)
        state = init_classifier(3, 4, 5, rng=rng)
        buffer = ExemplarBuffer(16)
        update_random(buffer, random_batch(rng, 20, 3, 4), rng)
        gate = GateState()
        set_threshold(gate, 0.3)
        gate.prior.observe({0, 1})
        cfg = SgdConfig()

        def retrieve(reference, k):
            return retrieve_interfered(buffer, k, reference, state, cfg, rng, candidate_size=8)

        decisions = []
        for step in range(20):
            batch = random_batch(rng, 6, 3, 4, first_id=1000 + 10 * step)
            _, _, chosen = gate_batch(batch, buffer, state, gate, retrieve, step, task=1)
            decisions.append(chosen)
        return decisions, [(r.acc_full, r.acc_novel) for r in gate.branch_log]

    assert run_once() == run_once()


def test_prior_monotone_under_observation():
    rng = np.random.default_rng(3)
    gate = GateState()
    previous: set[int] = set()
    for _ in range(50):
        observe_labels(gate, random_batch(rng, 4, 2, 8))
        assert previous <= gate.prior.seen_labels
        previous = set(gate.prior.seen_labels)


# --- branch log ---


def test_branch_log_csv_round_trip(tmp_path):
    state = biased_model(favored=0)
    gate = GateState()
    set_threshold(gate, 0.5)
    gate.prior.observe({0})
    for step in range(3):
        gate_batch(labeled([0, 0, 1]), ExemplarBuffer(4), state, gate,
                   no_exemplars, step=step, task=1)
    path = tmp_path / "branch_log.csv"
    write_branch_log(gate.branch_log, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "task", "acc_vm1", "acc_vm2", "TH", "chosen"]
    assert len(rows) == 4
    assert rows[1][0] == "0"
    assert float(rows[1][2]) == pytest.approx(2 / 3)
